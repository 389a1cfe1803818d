/** Whole-rupee text entry converted to integer minor units (paisa) before
 * anything touches the wire; no floating point anywhere. */

const AMOUNT_RE = /^\s*(\d+)(?:\.(\d{1,2}))?\s*$/;

/** Parse operator input like "100", "100.5", "100.50" into paisa. */
export function rupeesToMinor(text: string): number {
  const match = AMOUNT_RE.exec(text);
  if (!match) {
    throw new Error(`not an amount: ${JSON.stringify(text)}`);
  }
  const whole = Number(match[1]);
  const fraction = match[2] ?? "";
  const paisa = fraction.length === 0 ? 0
    : fraction.length === 1 ? Number(fraction) * 10
    : Number(fraction);
  return whole * 100 + paisa;
}

/** Render paisa in the wire's amount form: "100" or "100.50". */
export function minorToWire(minor: number): string {
  if (!Number.isInteger(minor)) {
    throw new Error(`minor units must be integral, got ${minor}`);
  }
  const sign = minor < 0 ? "-" : "";
  const magnitude = Math.abs(minor);
  const whole = Math.floor(magnitude / 100);
  const paisa = magnitude % 100;
  return paisa === 0
    ? `${sign}${whole}`
    : `${sign}${whole}.${String(paisa).padStart(2, "0")}`;
}

/** Parse a comma-separated note list ("100,20,20") into denominations. */
export function parseNotes(text: string): number[] {
  const parts = text.split(",").map((p) => p.trim()).filter((p) => p.length > 0);
  if (parts.length === 0) {
    throw new Error("no notes given");
  }
  return parts.map((p) => {
    if (!/^\d+$/.test(p)) {
      throw new Error(`not a note denomination: ${JSON.stringify(p)}`);
    }
    return Number(p);
  });
}
