// Token-level diff between two captions, highlighting the edited words.

export type DiffKind = "same" | "removed" | "added";

export interface DiffToken {
  text: string;
  kind: DiffKind;
}

export function tokenize(caption: string): string[] {
  return caption.split(/\s+/).filter((t) => t.length > 0);
}

/** Longest-common-subsequence diff over whitespace tokens. */
export function tokenDiff(previous: string, current: string): DiffToken[] {
  const a = tokenize(previous);
  const b = tokenize(current);
  const n = a.length;
  const m = b.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array<number>(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] = a[i] === b[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const out: DiffToken[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (a[i] === b[j]) {
      out.push({ text: a[i], kind: "same" });
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      out.push({ text: a[i], kind: "removed" });
      i++;
    } else {
      out.push({ text: b[j], kind: "added" });
      j++;
    }
  }
  for (; i < n; i++) out.push({ text: a[i], kind: "removed" });
  for (; j < m; j++) out.push({ text: b[j], kind: "added" });
  return out;
}
