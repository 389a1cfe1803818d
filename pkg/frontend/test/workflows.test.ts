import { describe, expect, it } from "vitest";

import { ApiClient, HttpReply, Transport } from "../src/api.js";
import {
  ACCOUNT_EXISTS,
  EXECUTED,
  NETWORK_TROUBLE,
  TRY_AGAIN,
  addCustomer,
  cancelTransaction,
  runTransaction,
  verifyAccount,
  verifyPin,
} from "../src/workflows.js";

/** Minimal scripted counterpart of the bank server: one account "Rum" with
 * PIN 1234, a known counterparty "Merchant", and the stepwise RPC rules. */
function makeFakeBank(options: { admin?: boolean } = {}) {
  const bodies: string[] = [];
  let selector = "";

  function rpcReply(raw: Record<string, string>): Record<string, string> {
    const method = raw["Method"] ?? "";
    switch (method) {
      case "EnterAmount":
        selector = raw["Workflow"] ?? "";
        if (raw["To Account"] === "Ghost") {
          return { Method: method, Result: "NotTransmitted", Error: "Account Not Found" };
        }
        return { Method: method, Result: "OK", Error: "null" };
      case "EnterPIN":
        return { Method: method, Result: "PIN", Error: "null" };
      case "VerifyPIN":
        return raw["PIN"] === "1234"
          ? { Method: method, Result: "Verified", Error: "null" }
          : { Method: method, Result: "NotVerified", Error: "Verification Unsuccessful" };
      case "Transmit":
        return {
          Method: method,
          Result: selector === "Transaction Account To Account" ? "Transmission Successful" : "OK",
          Error: "null",
        };
      case "VerifyAccount":
        return raw["To Account"] === "Merchant"
          ? { Method: method, Result: "Verified", Message: "Account Exists.", Error: "null" }
          : { Method: method, Result: "NotVerified", Error: "Account Not Found" };
      case "CancelTransaction":
        if (raw["PIN"] !== "1234") {
          return { Method: method, Result: "NotVerified", Error: "Verification Unsuccessful" };
        }
        return raw["Amount"] === "100"
          ? { Method: method, Result: "OK", Error: "null", ReversalOf: "7" }
          : { Method: method, Result: "NotAccepted", Error: "Internal: no matching transaction" };
      case "AddCustomer":
        return options.admin
          ? { Method: method, Result: "OK", Error: "null", Account: raw["Name"] ?? "" }
          : { Method: method, Result: "NotAccepted", Error: "Internal: admin capability required" };
      default:
        return { Method: method, Result: "NotAccepted", Error: `Internal: unknown method` };
    }
  }

  const transport: Transport = async (url, init): Promise<HttpReply> => {
    if (url.endsWith("/login")) {
      return { status: 200, body: JSON.stringify({
        token: "tok", expiresAt: "2999-01-01T00:00:00Z",
        isAdmin: options.admin ?? false, account: "Rum",
      }) };
    }
    if (url.endsWith("/card/insert")) {
      return { status: 200, body: JSON.stringify({
        cardAuthenticated: true, serverAuthenticated: true,
        cardNumber: "1", accountId: "Rum", synced: true, cachedBalanceMinor: 12000,
      }) };
    }
    if (url.endsWith("/rpc")) {
      const body = init.body ?? "";
      bodies.push(body);
      return { status: 200, body: JSON.stringify(rpcReply(JSON.parse(body))) };
    }
    return { status: 404, body: "no such endpoint" };
  };

  return { transport, bodies };
}

function clientWithCard(bank: ReturnType<typeof makeFakeBank>): ApiClient {
  const api = new ApiClient("http://bank", bank.transport);
  api.cardAccount = "Rum";
  return api;
}

function requestMethods(bank: ReturnType<typeof makeFakeBank>): string[] {
  return bank.bodies.map((b) => (JSON.parse(b) as Record<string, string>)["Method"] ?? "");
}

describe("runTransaction", () => {
  it("walks the four-step exchange and reports Executed.", async () => {
    const bank = makeFakeBank();
    const api = clientWithCard(bank);
    const outcome = await runTransaction(api, "Pay Over The Counter", {
      amount: "100", pin: "1234", account: "Merchant",
    });
    expect(outcome.kind).toBe("success");
    expect(outcome.text).toBe(EXECUTED);
    expect(requestMethods(bank)).toEqual(["EnterAmount", "EnterPIN", "VerifyPIN", "Transmit"]);
    expect(bank.bodies[0]).toContain('"Workflow": "Pay Over The Counter"');
    expect(bank.bodies[0]).toContain('"Amount": "100"');
    expect(outcome.transcript).toHaveLength(8);
  });

  it("routes the transfer option to its wire selector name", async () => {
    const bank = makeFakeBank();
    const outcome = await runTransaction(clientWithCard(bank), "Account To Account Transfer", {
      amount: "10", pin: "1234", account: "Merchant",
    });
    expect(outcome.text).toBe(EXECUTED);
    expect(bank.bodies[0]).toContain('"Workflow": "Transaction Account To Account"');
  });

  it("labels a withdrawal with the cash account on the receiving side", async () => {
    const bank = makeFakeBank();
    await runTransaction(clientWithCard(bank), "Cash Withdrawal", { amount: "10", pin: "1234" });
    const opener = JSON.parse(bank.bodies[0] ?? "{}") as Record<string, string>;
    expect(opener["To Account"]).toBe("Currency Detector");
    expect(opener["From Account"]).toBe("Rum");
  });

  it("derives a deposit's amount from its notes and credits the card account", async () => {
    const bank = makeFakeBank();
    await runTransaction(clientWithCard(bank), "Cash Deposit", { pin: "1234", notes: "100,20" });
    const opener = JSON.parse(bank.bodies[0] ?? "{}") as Record<string, string>;
    expect(opener["To Account"]).toBe("Rum");
    expect(opener["From Account"]).toBe("currency detector");
    expect(opener["Amount"]).toBe("120");
    expect(opener["Notes"]).toBe("100,20");
  });

  it("stops at the first error and reports Try Again Later.", async () => {
    const bank = makeFakeBank();
    const outcome = await runTransaction(clientWithCard(bank), "Pay Over The Counter", {
      amount: "100", pin: "9999", account: "Merchant",
    });
    expect(outcome.kind).toBe("error");
    expect(outcome.text).toBe(TRY_AGAIN);
    expect(requestMethods(bank)).toEqual(["EnterAmount", "EnterPIN", "VerifyPIN"]);
    expect(outcome.transcript).toHaveLength(6);
  });

  it("fails fast on an unknown recipient without transmitting", async () => {
    const bank = makeFakeBank();
    const outcome = await runTransaction(clientWithCard(bank), "Pay Over The Counter", {
      amount: "100", pin: "1234", account: "Ghost",
    });
    expect(outcome.text).toBe(TRY_AGAIN);
    expect(requestMethods(bank)).toEqual(["EnterAmount"]);
  });

  it("rejects bad local input without sending anything", async () => {
    const bank = makeFakeBank();
    const api = clientWithCard(bank);
    for (const input of [
      { amount: "abc", pin: "1234", account: "Merchant" },
      { amount: "100", pin: "1234" }, // no recipient
      { pin: "1234", notes: "" },
    ] as const) {
      const option = "notes" in input ? "Cash Deposit" : "Pay Over The Counter";
      const outcome = await runTransaction(api, option, input);
      expect(outcome.kind).toBe("error");
      expect(outcome.text).toBe(TRY_AGAIN);
    }
    expect(bank.bodies).toHaveLength(0);
  });

  it("refuses to start without an inserted card", async () => {
    const bank = makeFakeBank();
    const api = new ApiClient("http://bank", bank.transport);
    const outcome = await runTransaction(api, "Cash Withdrawal", { amount: "10", pin: "1234" });
    expect(outcome.text).toBe(TRY_AGAIN);
    expect(bank.bodies).toHaveLength(0);
  });

  it("never keeps the PIN in the transcript", async () => {
    const bank = makeFakeBank();
    const outcome = await runTransaction(clientWithCard(bank), "Pay Over The Counter", {
      amount: "100", pin: "1234", account: "Merchant",
    });
    const flat = JSON.stringify(outcome);
    expect(flat).not.toContain('"1234"');
    expect(flat).toContain('"****"');
    // the wire itself must still carry the real PIN
    expect(bank.bodies.some((b) => b.includes('"PIN": "1234"'))).toBe(true);
  });

  it("strips the workflow selector from the kept requests", async () => {
    const bank = makeFakeBank();
    const outcome = await runTransaction(clientWithCard(bank), "Cash Withdrawal", {
      amount: "10", pin: "1234",
    });
    expect(JSON.stringify(outcome.transcript)).not.toContain("Workflow");
  });

  it("reports transport failures as a retryable network message", async () => {
    const down: Transport = async () => {
      throw new TypeError("fetch failed");
    };
    const api = new ApiClient("http://bank", down);
    api.cardAccount = "Rum";
    const outcome = await runTransaction(api, "Cash Withdrawal", { amount: "10", pin: "1234" });
    expect(outcome.kind).toBe("error");
    expect(outcome.text).toBe(NETWORK_TROUBLE);
    expect(outcome.retryable).toBe(true);
    expect(outcome.unauthorized).toBe(false);
  });

  it("flags a rejected session token", async () => {
    const expired: Transport = async () => ({ status: 401, body: '{"error": "no session"}' });
    const api = new ApiClient("http://bank", expired);
    api.cardAccount = "Rum";
    const outcome = await runTransaction(api, "Cash Withdrawal", { amount: "10", pin: "1234" });
    expect(outcome.unauthorized).toBe(true);
    expect(outcome.retryable).toBe(false);
    expect(outcome.text).toBe(TRY_AGAIN);
  });
});

describe("standalone methods", () => {
  it("verifyAccount reports Account Exists. on a hit", async () => {
    const bank = makeFakeBank();
    const api = clientWithCard(bank);
    const hit = await verifyAccount(api, "Merchant");
    expect(hit.kind).toBe("verified");
    expect(hit.text).toBe(ACCOUNT_EXISTS);
    const miss = await verifyAccount(api, "Ghost");
    expect(miss.kind).toBe("error");
    expect(miss.text).toBe(TRY_AGAIN);
  });

  it("verifyPin mirrors the terminal dialogs", async () => {
    const bank = makeFakeBank();
    const api = clientWithCard(bank);
    expect((await verifyPin(api, "1234")).text).toBe(EXECUTED);
    expect((await verifyPin(api, "0000")).text).toBe(TRY_AGAIN);
  });

  it("cancelTransaction succeeds only on a matching transaction", async () => {
    const bank = makeFakeBank();
    const api = clientWithCard(bank);
    const ok = await cancelTransaction(api, { account: "Merchant", amount: "100", pin: "1234" });
    expect(ok.text).toBe(EXECUTED);
    const gone = await cancelTransaction(api, { account: "Merchant", amount: "33", pin: "1234" });
    expect(gone.text).toBe(TRY_AGAIN);
    const badInput = await cancelTransaction(api, { account: "Merchant", amount: "x", pin: "1234" });
    expect(badInput.text).toBe(TRY_AGAIN);
  });

  it("addCustomer needs the admin capability", async () => {
    const clerk = clientWithCard(makeFakeBank({ admin: false }));
    expect((await addCustomer(clerk, {
      name: "N", username: "n", password: "p", pin: "1111",
    })).text).toBe(TRY_AGAIN);

    const adminBank = makeFakeBank({ admin: true });
    const admin = clientWithCard(adminBank);
    const made = await addCustomer(admin, {
      name: "N", username: "n", password: "p", pin: "1111", initialBalance: "50",
    });
    expect(made.text).toBe(EXECUTED);
    const last = adminBank.bodies[adminBank.bodies.length - 1] ?? "";
    expect(last).toContain('"InitialBalance": "50"');
    // secrets masked in the kept transcript, but present on the wire
    expect(last).toContain('"Password": "p"');
    expect(JSON.stringify(made.transcript)).not.toContain('"p"');
    expect(JSON.stringify(made.transcript)).not.toContain('"1111"');
  });
});
