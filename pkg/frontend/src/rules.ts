// Local mirror of the server's flip legality rule, used to cross-check the
// selector in tests and to fail loudly if a server payload ever disagrees.
// The server remains the authority; this never feeds the UI on its own.

export interface FlipBounds {
  minFlips: number;
  maxFlips: number;
}

export function legalFlipChoices(remaining: number, bounds: FlipBounds): number[] {
  if (remaining < 0) {
    throw new Error("remaining budget cannot be negative");
  }
  const out: number[] = [];
  const top = Math.min(bounds.maxFlips, remaining);
  for (let n = bounds.minFlips; n <= top; n++) {
    const left = remaining - n;
    if (left === 0 || left >= bounds.minFlips) {
      out.push(n);
    }
  }
  return out;
}

export function sameChoices(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((value, index) => value === b[index]);
}
