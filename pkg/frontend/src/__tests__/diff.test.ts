import { describe, expect, it } from "vitest";

import { tokenDiff, tokenize, type DiffToken } from "../diff.js";

/** Independent LCS length via a fresh DP table (the reference routine). */
function lcsLength(a: string[], b: string[]): number {
  const dp: number[][] = Array.from({ length: a.length + 1 }, () =>
    new Array<number>(b.length + 1).fill(0),
  );
  for (let i = 1; i <= a.length; i++) {
    for (let j = 1; j <= b.length; j++) {
      dp[i][j] =
        a[i - 1] === b[j - 1] ? dp[i - 1][j - 1] + 1 : Math.max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return dp[a.length][b.length];
}

function seededRandom(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

describe("tokenDiff", () => {
  it("returns all-same for identical captions", () => {
    const diff = tokenDiff("a red shirt", "a red shirt");
    expect(diff.every((t) => t.kind === "same")).toBe(true);
    expect(diff.map((t) => t.text)).toEqual(["a", "red", "shirt"]);
  });

  it("marks a single substituted color word", () => {
    const diff = tokenDiff("a red shirt", "a blue shirt");
    expect(diff).toEqual<DiffToken[]>([
      { text: "a", kind: "same" },
      { text: "red", kind: "removed" },
      { text: "blue", kind: "added" },
      { text: "shirt", kind: "same" },
    ]);
  });

  it("reconstructs both sides and matches the LCS oracle on random pairs", () => {
    const rand = seededRandom(7);
    const words = ["red", "blue", "green", "shirt", "pants", "a", "the", "woman", "man"];
    for (let trial = 0; trial < 200; trial++) {
      const pick = () =>
        Array.from({ length: 1 + Math.floor(rand() * 8) }, () => words[Math.floor(rand() * words.length)]);
      const a = pick();
      const b = pick();
      const diff = tokenDiff(a.join(" "), b.join(" "));
      const left = diff.filter((t) => t.kind !== "added").map((t) => t.text);
      const right = diff.filter((t) => t.kind !== "removed").map((t) => t.text);
      expect(left).toEqual(a);
      expect(right).toEqual(b);
      const same = diff.filter((t) => t.kind === "same").length;
      expect(same).toBe(lcsLength(a, b));
    }
  });

  it("tokenizes on whitespace only", () => {
    expect(tokenize("  a  red   shirt ")).toEqual(["a", "red", "shirt"]);
  });
});
