/** Drives transactions over the RPC endpoint and folds every outcome into
 * one of the three terminal dialogs (plus a retryable network message).
 *
 * A money transaction walks EnterAmount -> EnterPIN -> VerifyPIN -> Transmit
 * and stops at the first response that carries an error. The transcript keeps
 * redacted requests only; responses never contain secrets.
 */

import { ApiClient, ApiError } from "./api.js";
import { MenuOption, TransactionOption, WORKFLOW_SELECTOR } from "./menu.js";
import { minorToWire, parseNotes, rupeesToMinor } from "./money.js";
import { Envelope, makeRequest, redactEnvelope } from "./wire.js";

export const EXECUTED = "Executed.";
export const TRY_AGAIN = "Try Again Later.";
export const ACCOUNT_EXISTS = "Account Exists.";
export const NETWORK_TROUBLE = "Could not reach the payment server. Check the connection and retry.";

export const DEPOSIT_CASH = "currency detector";
export const WITHDRAW_CASH = "Currency Detector";

export const PIN_PROMPT_POTC = "Please insert PIN:";
export const PIN_PROMPT = "Please Enter PIN:";
export const VERIFYING_NOTE = "Verifying PIN entry";

const SUCCESS_RESULTS = new Set(["OK", "Transmission Successful"]);
const WORKFLOW_KEY = "Workflow";

export interface Outcome {
  kind: "success" | "error" | "verified";
  text: string;
  /** true only for transport-level failures worth retrying verbatim */
  retryable: boolean;
  /** true when the server rejected our session token (HTTP 401) */
  unauthorized: boolean;
  transcript: Envelope[];
}

function done(kind: Outcome["kind"], text: string, transcript: Envelope[]): Outcome {
  return { kind, text, retryable: false, unauthorized: false, transcript };
}

function networkTrouble(exc: unknown, transcript: Envelope[]): Outcome {
  const unauthorized = exc instanceof ApiError && exc.status === 401;
  return {
    kind: "error",
    text: unauthorized ? TRY_AGAIN : NETWORK_TROUBLE,
    retryable: !unauthorized,
    unauthorized,
    transcript,
  };
}

/** Exchange one request; record (redacted request, response) in `transcript`. */
async function exchange(
  api: ApiClient,
  request: Envelope,
  transcript: Envelope[],
): Promise<Envelope> {
  const response = await api.rpc(request);
  const clean = { ...request, extras: { ...request.extras } };
  delete clean.extras[WORKFLOW_KEY]; // routing plumbing, not wire texture
  transcript.push(redactEnvelope(clean), response);
  return response;
}

export type { TransactionOption } from "./menu.js";

export interface TransactionInput {
  /** amount in rupees, e.g. "100" or "99.50"; ignored for deposits */
  amount?: string;
  pin: string;
  /** counterparty account; falls back to the card's account for deposits */
  account?: string;
  /** comma-separated note denominations for deposits, e.g. "100,20" */
  notes?: string;
}

interface Legs {
  to: string;
  from: string;
  amountWire: string;
  extras: Record<string, string>;
}

function planLegs(option: TransactionOption, cardAccount: string, input: TransactionInput): Legs {
  if (option === "Cash Deposit") {
    const notes = parseNotes(input.notes ?? "");
    const totalMinor = notes.reduce((sum, note) => sum + note, 0) * 100;
    return {
      to: input.account?.trim() || cardAccount,
      from: DEPOSIT_CASH,
      amountWire: minorToWire(totalMinor),
      extras: { Notes: notes.join(",") },
    };
  }
  const amountWire = minorToWire(rupeesToMinor(input.amount ?? ""));
  if (option === "Cash Withdrawal") {
    return { to: WITHDRAW_CASH, from: cardAccount, amountWire, extras: {} };
  }
  const to = input.account?.trim() ?? "";
  if (to === "") {
    throw new Error("a recipient account is required");
  }
  return { to, from: cardAccount, amountWire, extras: {} };
}

export async function runTransaction(
  api: ApiClient,
  option: TransactionOption,
  input: TransactionInput,
): Promise<Outcome> {
  const transcript: Envelope[] = [];
  const cardAccount = api.cardAccount;
  if (cardAccount === null) {
    return done("error", TRY_AGAIN, transcript);
  }
  let legs: Legs;
  try {
    legs = planLegs(option, cardAccount, input);
  } catch {
    return done("error", TRY_AGAIN, transcript);
  }

  const potc = option === "Pay Over The Counter";
  const requests: Envelope[] = [
    makeRequest(
      "EnterAmount",
      { toAccount: legs.to, fromAccount: legs.from, amount: legs.amountWire },
      { ...legs.extras, [WORKFLOW_KEY]: WORKFLOW_SELECTOR[option] },
    ),
    makeRequest("EnterPIN", { message: potc ? PIN_PROMPT_POTC : PIN_PROMPT }),
    makeRequest("VerifyPIN", {
      pin: input.pin,
      ...(potc ? {} : { message: VERIFYING_NOTE }),
    }),
    makeRequest("Transmit", {
      toAccount: legs.to,
      fromAccount: legs.from,
      amount: legs.amountWire,
    }),
  ];

  let last: Envelope | null = null;
  for (const request of requests) {
    try {
      last = await exchange(api, request, transcript);
    } catch (exc) {
      return networkTrouble(exc, transcript);
    }
    if (last.error !== null && last.error !== undefined) {
      return done("error", TRY_AGAIN, transcript);
    }
  }
  const ok = last !== null && last.result !== undefined && SUCCESS_RESULTS.has(last.result);
  return done(ok ? "success" : "error", ok ? EXECUTED : TRY_AGAIN, transcript);
}

export async function verifyAccount(api: ApiClient, account: string): Promise<Outcome> {
  const transcript: Envelope[] = [];
  try {
    const response = await exchange(
      api, makeRequest("VerifyAccount", { toAccount: account }), transcript);
    if (response.result === "Verified") {
      return done("verified", ACCOUNT_EXISTS, transcript);
    }
    return done("error", TRY_AGAIN, transcript);
  } catch (exc) {
    return networkTrouble(exc, transcript);
  }
}

export async function verifyPin(api: ApiClient, pin: string): Promise<Outcome> {
  const transcript: Envelope[] = [];
  try {
    const response = await exchange(api, makeRequest("VerifyPIN", { pin }), transcript);
    if (response.result === "Verified") {
      return done("success", EXECUTED, transcript);
    }
    return done("error", TRY_AGAIN, transcript);
  } catch (exc) {
    return networkTrouble(exc, transcript);
  }
}

export interface CancelInput {
  account: string;
  amount: string;
  pin: string;
}

export async function cancelTransaction(api: ApiClient, input: CancelInput): Promise<Outcome> {
  const transcript: Envelope[] = [];
  try {
    const request = makeRequest("CancelTransaction", {
      toAccount: input.account,
      amount: minorToWire(rupeesToMinor(input.amount)),
      pin: input.pin,
    });
    const response = await exchange(api, request, transcript);
    if (response.result === "OK") {
      return done("success", EXECUTED, transcript);
    }
    return done("error", TRY_AGAIN, transcript);
  } catch (exc) {
    if (exc instanceof ApiError || !(exc instanceof Error) || exc.name === "TypeError") {
      return networkTrouble(exc, transcript);
    }
    return done("error", TRY_AGAIN, transcript); // local input parse failure
  }
}

export interface NewCustomer {
  name: string;
  username: string;
  password: string;
  pin: string;
  initialBalance?: string;
}

export async function addCustomer(api: ApiClient, fields: NewCustomer): Promise<Outcome> {
  const transcript: Envelope[] = [];
  const extras: Record<string, string> = {
    Name: fields.name,
    Username: fields.username,
    Password: fields.password,
  };
  if (fields.initialBalance !== undefined && fields.initialBalance.trim() !== "") {
    extras["InitialBalance"] = fields.initialBalance.trim();
  }
  try {
    const request = makeRequest("AddCustomer", { pin: fields.pin }, extras);
    const response = await exchange(api, request, transcript);
    if (response.result === "OK") {
      return done("success", EXECUTED, transcript);
    }
    return done("error", TRY_AGAIN, transcript);
  } catch (exc) {
    return networkTrouble(exc, transcript);
  }
}

export function isTransactionOption(option: MenuOption): option is TransactionOption {
  return option in WORKFLOW_SELECTOR;
}
