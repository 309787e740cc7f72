/** Debounced single-flight request scheduling with stale-response discard.
 *
 * Interactions funnel through request(); bursts collapse to the latest
 * arguments after the debounce window. At most one request is in flight
 * per scheduler; whatever arrived while waiting is sent afterwards.
 * Every launch gets a monotonically increasing id and a response only
 * applies if no later response has already been applied, so a
 * superseded request can never overwrite a newer image.
 */

export const DEBOUNCE_MS = 150;

export class RequestScheduler<A, R> {
  private seq = 0;
  private appliedSeq = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = 0;
  private queued: A | null = null;

  constructor(
    private readonly send: (args: A) => Promise<R>,
    private readonly apply: (result: R, args: A) => void,
    private readonly onError: (err: unknown) => void = () => undefined,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Schedule a request after the debounce window, replacing any pending one. */
  request(args: A): void {
    this.queued = args;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.launch(false);
    }, this.debounceMs);
  }

  /** Send the pending request now. force launches even over an in-flight
   * request (used when switching volumes, where the old render is moot). */
  flush(force = false): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.launch(force);
  }

  get inFlightCount(): number {
    return this.inFlight;
  }

  private launch(force: boolean): void {
    if (this.queued === null) return;
    if (this.inFlight > 0 && !force) return; // relaunched on completion
    const args = this.queued;
    this.queued = null;
    const id = ++this.seq;
    this.inFlight += 1;
    this.send(args).then(
      (result) => {
        this.inFlight -= 1;
        if (id > this.appliedSeq) {
          this.appliedSeq = id;
          this.apply(result, args);
        }
        this.launch(false);
      },
      (err) => {
        this.inFlight -= 1;
        if (id > this.appliedSeq) this.onError(err);
        this.launch(false);
      },
    );
  }
}
