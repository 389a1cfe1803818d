import { describe, expect, it } from "vitest";

import { minorToWire, parseNotes, rupeesToMinor } from "../src/money.js";

describe("rupeesToMinor", () => {
  it("parses whole rupees", () => {
    expect(rupeesToMinor("100")).toBe(10000);
    expect(rupeesToMinor("0")).toBe(0);
    expect(rupeesToMinor("  7 ")).toBe(700);
  });

  it("parses one- and two-digit fractions", () => {
    expect(rupeesToMinor("100.5")).toBe(10050);
    expect(rupeesToMinor("100.50")).toBe(10050);
    expect(rupeesToMinor("0.05")).toBe(5);
    expect(rupeesToMinor("99.99")).toBe(9999);
  });

  it("rejects junk", () => {
    for (const bad of ["", "abc", "-5", "12.345", "1,000", "1.2.3", "."]) {
      expect(() => rupeesToMinor(bad)).toThrow();
    }
  });
});

describe("minorToWire", () => {
  it("renders whole amounts without a fraction", () => {
    expect(minorToWire(10000)).toBe("100");
    expect(minorToWire(0)).toBe("0");
  });

  it("zero-pads the paisa column", () => {
    expect(minorToWire(10050)).toBe("100.50");
    expect(minorToWire(5)).toBe("0.05");
    expect(minorToWire(-10050)).toBe("-100.50");
  });

  it("refuses non-integral minor units", () => {
    expect(() => minorToWire(1.5)).toThrow();
  });

  it("round-trips through rupeesToMinor", () => {
    for (const minor of [0, 1, 99, 100, 10050, 123456]) {
      expect(rupeesToMinor(minorToWire(minor))).toBe(minor);
    }
  });
});

describe("parseNotes", () => {
  it("splits a comma list", () => {
    expect(parseNotes("100,20,20")).toEqual([100, 20, 20]);
    expect(parseNotes(" 100 , 20 ")).toEqual([100, 20]);
  });

  it("rejects empty and non-numeric entries", () => {
    expect(() => parseNotes("")).toThrow();
    expect(() => parseNotes(" , ")).toThrow();
    expect(() => parseNotes("100,x")).toThrow();
    expect(() => parseNotes("10.5")).toThrow();
  });
});
