/** Client side of the wire protocol.
 *
 * The terminal emits exactly the canonical envelope shape the server's
 * golden corpus pins down: fixed key order, two-space indent, "HHMM hours"
 * and "D-M-YYYY" legacy stamps plus an RFC3339 Timestamp, and the literal
 * string "null" in a response's Error slot. Decoding is tolerant about key
 * casing and the known aliases but otherwise expects the server's canonical
 * output.
 */

export interface Envelope {
  method: string;
  result?: string;
  message?: string;
  toAccount?: string;
  fromAccount?: string;
  amount?: string;
  pin?: string;
  /** null on responses that carry no error; undefined on requests. */
  error?: string | null;
  timestamp?: Date;
  extras: Record<string, string>;
}

export function makeRequest(
  method: string,
  fields: Omit<Partial<Envelope>, "method" | "extras"> = {},
  extras: Record<string, string> = {},
): Envelope {
  return { method, ...fields, extras: { ...extras } };
}

export function isResponse(envelope: Envelope): boolean {
  return envelope.result !== undefined;
}

function two(n: number): string {
  return String(n).padStart(2, "0");
}

export function wireTime(ts: Date): string {
  return `${two(ts.getUTCHours())}${two(ts.getUTCMinutes())} hours`;
}

export function wireDate(ts: Date): string {
  return `${ts.getUTCDate()}-${ts.getUTCMonth() + 1}-${ts.getUTCFullYear()}`;
}

export function wireTimestamp(ts: Date): string {
  return (
    `${ts.getUTCFullYear()}-${two(ts.getUTCMonth() + 1)}-${two(ts.getUTCDate())}` +
    `T${two(ts.getUTCHours())}:${two(ts.getUTCMinutes())}:${two(ts.getUTCSeconds())}Z`
  );
}

/** Canonical encoding; key insertion order is the wire order. */
export function encodeEnvelope(envelope: Envelope, clock: () => Date = () => new Date()): string {
  const ts = envelope.timestamp ?? clock();
  const obj: Record<string, string> = {};
  obj["Method"] = envelope.method;
  if (envelope.result !== undefined) obj["Result"] = envelope.result;
  if (envelope.message !== undefined) obj["Message"] = envelope.message;
  if (envelope.toAccount !== undefined) obj["To Account"] = envelope.toAccount;
  if (envelope.fromAccount !== undefined) obj["From Account"] = envelope.fromAccount;
  if (envelope.amount !== undefined) obj["Amount"] = envelope.amount;
  if (envelope.pin !== undefined) obj["PIN"] = envelope.pin;
  obj["Time"] = wireTime(ts);
  obj["Date"] = wireDate(ts);
  if (isResponse(envelope) || (envelope.error !== undefined && envelope.error !== null)) {
    obj["Error"] = envelope.error ?? "null";
  }
  obj["Timestamp"] = wireTimestamp(ts);
  for (const key of Object.keys(envelope.extras).sort()) {
    obj[key] = envelope.extras[key]!;
  }
  return JSON.stringify(obj, null, 2);
}

const CANONICAL_KEYS: Record<string, keyof Envelope | "timestampText" | "timeText" | "dateText"> = {
  "method": "method",
  "message type": "method",
  "result": "result",
  "message": "message",
  "to account": "toAccount",
  "from account": "fromAccount",
  "amount": "amount",
  "pin": "pin",
  "error": "error",
  "time": "timeText",
  "date": "dateText",
  "timestamp": "timestampText",
};

const METHOD_ALIASES: Record<string, string> = { Amount: "EnterAmount" };

const TIME_RE = /^\s*(\d{3,4})\s*hours?\s*$/i;
const DATE_RE = /^\s*(\d{1,2})-(\d{1,2})-(\d{4})\s*$/;

export class WireError extends Error {}

export function decodeEnvelope(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch (exc) {
    throw new WireError(`unparseable message: ${String(exc)}`);
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new WireError("message is not a JSON object");
  }

  const fields = new Map<string, string>();
  const extras: Record<string, string> = {};
  for (const [key, value] of Object.entries(raw as Record<string, unknown>)) {
    const canon = CANONICAL_KEYS[key.trim().toLowerCase()];
    const textValue = typeof value === "string" ? value : JSON.stringify(value);
    if (canon === undefined) {
      extras[key] = textValue;
    } else if (!fields.has(canon)) {
      fields.set(canon, textValue);
    }
  }

  const methodRaw = fields.get("method");
  if (methodRaw === undefined) {
    throw new WireError("no method key under any accepted alias");
  }
  const method = METHOD_ALIASES[methodRaw] ?? methodRaw;

  const errorRaw = fields.get("error");
  const error = errorRaw === undefined || errorRaw === "null" || errorRaw === "None" || errorRaw === ""
    ? null
    : errorRaw;

  let timestamp: Date | undefined;
  const stamp = fields.get("timestampText");
  if (stamp !== undefined) {
    const parsed = new Date(stamp);
    if (!Number.isNaN(parsed.getTime())) timestamp = parsed;
  }
  if (timestamp === undefined) {
    const timeMatch = TIME_RE.exec(fields.get("timeText") ?? "");
    const dateMatch = DATE_RE.exec(fields.get("dateText") ?? "");
    if (timeMatch && dateMatch) {
      const hhmm = timeMatch[1]!.padStart(4, "0");
      timestamp = new Date(Date.UTC(
        Number(dateMatch[3]), Number(dateMatch[2]) - 1, Number(dateMatch[1]),
        Number(hhmm.slice(0, 2)), Number(hhmm.slice(2)),
      ));
    }
  }

  const result = fields.get("result");
  return {
    method,
    ...(result !== undefined ? { result: result.trim() } : {}),
    ...(fields.has("message") ? { message: fields.get("message")! } : {}),
    ...(fields.has("toAccount") ? { toAccount: fields.get("toAccount")!.trim() } : {}),
    ...(fields.has("fromAccount") ? { fromAccount: fields.get("fromAccount")!.trim() } : {}),
    ...(fields.has("amount") ? { amount: fields.get("amount")!.trim() } : {}),
    ...(fields.has("pin") ? { pin: fields.get("pin")! } : {}),
    ...(fields.has("error") || result !== undefined ? { error } : {}),
    ...(timestamp !== undefined ? { timestamp } : {}),
    extras,
  };
}

const SECRET_KEY_RE = /pin|password|token/i;

/** Copy with every secret-bearing slot masked; safe to keep in page state. */
export function redactEnvelope(envelope: Envelope): Envelope {
  const extras: Record<string, string> = {};
  for (const [key, value] of Object.entries(envelope.extras)) {
    extras[key] = SECRET_KEY_RE.test(key) ? "****" : value;
  }
  return {
    ...envelope,
    ...(envelope.pin !== undefined ? { pin: "****" } : {}),
    extras,
  };
}
