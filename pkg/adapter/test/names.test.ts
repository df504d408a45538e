import { describe, expect, it } from "vitest";

import { extractLabels, extractPersonNames, normalizeText, stripHtml } from "../src/names.js";

describe("stripHtml", () => {
  it("removes tags and decodes common entities", () => {
    expect(stripHtml("<p>Hello <b>there</b></p>").trim()).toBe("Hello  there");
    expect(stripHtml("fish &amp; chips")).toBe("fish & chips");
    expect(stripHtml("&#72;i &#x21;")).toBe("Hi !");
  });

  it("drops script and style bodies entirely", () => {
    expect(stripHtml("<script>var Bob Smith = 1;</script>ok").trim()).toBe("ok");
  });
});

describe("normalizeText", () => {
  it("collapses whitespace and applies NFC", () => {
    const decomposed = "Amélie"; // e + combining acute
    expect(normalizeText(`  ${decomposed}   x `)).toBe("Amélie x");
  });
});

describe("extractPersonNames", () => {
  it("finds two people in a plain synopsis", () => {
    const names = extractPersonNames("Ada Lovelace meets Alan Turing to discuss machines.");
    expect(names).toEqual(["Ada Lovelace", "Alan Turing"]);
  });

  it("extracts names across HTML markup", () => {
    const names = extractPersonNames("<p>An interview with <b>Grace Hopper</b> about compilers.</p>");
    expect(names).toContain("Grace Hopper");
  });

  it("returns nothing for empty or lowercase text", () => {
    expect(extractPersonNames("")).toEqual([]);
    expect(extractPersonNames("   ")).toEqual([]);
    expect(extractPersonNames("no names mentioned here at all.")).toEqual([]);
  });

  it("keeps lowercase particles inside names", () => {
    expect(extractPersonNames("A recital of Ludwig van Beethoven works.")).toEqual(["Ludwig van Beethoven"]);
  });

  it("drops leading titles and ignores single capitalized words", () => {
    expect(extractPersonNames("Dr Ada Lovelace speaks. London is busy.")).toEqual(["Ada Lovelace"]);
  });

  it("de-duplicates repeated mentions", () => {
    const names = extractPersonNames("Marie Curie arrives. Later, Marie Curie departs.");
    expect(names).toEqual(["Marie Curie"]);
  });

  it("extracts the same string for composed and decomposed unicode", () => {
    const composed = extractPersonNames("Amélie Poulain stars.");
    const decomposed = extractPersonNames("Amélie Poulain stars.");
    expect(composed).toEqual(decomposed);
    expect(composed).toEqual(["Amélie Poulain"]);
  });
});

describe("extractLabels", () => {
  it("maps files without metadata or synopsis to empty lists", () => {
    const labels = extractLabels(["a", "b", "c"], {
      a: { synopsis: "Joan Clarke at Bletchley." },
      b: {},
    });
    expect(labels).toEqual({ a: ["Joan Clarke"], b: [], c: [] });
  });

  it("treats a non-string synopsis as missing", () => {
    const labels = extractLabels(["a"], { a: { synopsis: 42 } });
    expect(labels).toEqual({ a: [] });
  });
});
