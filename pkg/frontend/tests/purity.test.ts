/** Static analysis: the client must hold zero grading or classification
 * logic. These rules fail the build if score arithmetic, threshold
 * comparisons, weights, or correct-answer knowledge creep into src/. */

import { readFileSync, readdirSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

const SRC = join(dirname(fileURLToPath(import.meta.url)), "..", "src");

const FORBIDDEN: Array<{ rule: string; pattern: RegExp }> = [
  { rule: "arithmetic on scores", pattern: /\bscore\b\s*[*+/%-]/ },
  { rule: "arithmetic into scores", pattern: /[*+/%-]\s*\bscore\b/ },
  { rule: "score threshold comparison", pattern: /\bscore\b\s*(<|>|<=|>=)/ },
  { rule: "computing a classification", pattern: /\bclassification\s*=[^=]/ },
  { rule: "question weights", pattern: /\bweight\b/i },
  { rule: "correct-answer knowledge", pattern: /\bcorrect\b/i },
  { rule: "threshold access", pattern: /thresholds\s*\.\s*(min|max)/ },
  { rule: "grading verbs", pattern: /\b(grade|regrade)\s*\(/i },
];

function sourceFiles(): string[] {
  return readdirSync(SRC)
    .filter((name) => name.endsWith(".ts"))
    .map((name) => join(SRC, name));
}

describe("client purity", () => {
  it("has source files to scan", () => {
    expect(sourceFiles().length).toBeGreaterThanOrEqual(5);
  });

  for (const { rule, pattern } of FORBIDDEN) {
    it(`contains no ${rule}`, () => {
      for (const file of sourceFiles()) {
        const text = readFileSync(file, "utf-8");
        const match = text.match(pattern);
        expect(
          match,
          `${file} violates "${rule}": ${JSON.stringify(match?.[0])}`,
        ).toBeNull();
      }
    });
  }

  it("never reorders server-ranked lists", () => {
    // .sort( on data from the API is the telltale; the only permitted sorts
    // live in test helpers, not src/
    for (const file of sourceFiles()) {
      const text = readFileSync(file, "utf-8");
      expect(text.includes(".sort("), `${file} sorts client-side`).toBe(false);
    }
  });
});
