/**
 * Keeps one analysis in flight per tab. Each request takes a token; a
 * response is applied only if its token is still the newest, so a slow
 * earlier run can never overwrite the result of a later one.
 */

export class RunSequencer {
  private current = 0;

  begin(): number {
    this.current += 1;
    return this.current;
  }

  isCurrent(token: number): boolean {
    return token === this.current;
  }
}

/**
 * Runs `work` and applies it through `apply` unless a newer run started in
 * the meantime. Returns true when the result was applied.
 */
export async function runLatest<T>(
  sequencer: RunSequencer,
  work: () => Promise<T>,
  apply: (value: T) => void,
): Promise<boolean> {
  const token = sequencer.begin();
  const value = await work();
  if (!sequencer.isCurrent(token)) {
    return false;
  }
  apply(value);
  return true;
}
