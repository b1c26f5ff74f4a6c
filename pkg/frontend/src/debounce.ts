/**
 * Trailing-edge debounce used by the parameter controls, so dragging a
 * slider issues one service call per pause instead of one per tick.
 */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export const debounce = <A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs = 300,
): Debounced<A> => {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const invoke = () => {
    timer = null;
    if (pending !== null) {
      const args = pending;
      pending = null;
      fn(...args);
    }
  };

  const debounced = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(invoke, waitMs);
  };

  debounced.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };

  debounced.flush = () => {
    if (timer !== null) clearTimeout(timer);
    invoke();
  };

  return debounced;
};
