import { ApiClient, ProgressData } from "./api.js";

export const POLL_INTERVAL_MS = 2000;

export interface TimelineOptions {
  api: ApiClient;
  sessionId: string;
  /** Fired once the interrogation reaches a terminal status. */
  onDone: (progress: ProgressData) => void;
}

/** Interrogation progress as a list of per-turn entries, refreshed by
 * polling (turn granularity makes streaming unnecessary). */
export class Timeline {
  readonly root: HTMLElement;
  private list: HTMLOListElement;
  private statusLine: HTMLElement;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private options: TimelineOptions) {
    this.root = document.createElement("section");
    this.root.className = "timeline";
    this.statusLine = document.createElement("p");
    this.statusLine.className = "status";
    this.list = document.createElement("ol");
    this.root.append(this.statusLine, this.list);
  }

  start(): void {
    if (this.timer !== null) return;
    void this.tick();
    this.timer = setInterval(() => void this.tick(), POLL_INTERVAL_MS);
  }

  /** Cancel polling (navigation away, or terminal status reached). */
  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get polling(): boolean {
    return this.timer !== null;
  }

  private async tick(): Promise<void> {
    let progress: ProgressData;
    try {
      progress = await this.options.api.progress(this.options.sessionId);
    } catch {
      return; // transient failure: keep polling
    }
    this.render(progress);
    if (progress.status === "done" || progress.status === "error") {
      this.stop();
      this.options.onDone(progress);
    }
  }

  render(progress: ProgressData): void {
    this.statusLine.textContent =
      progress.status === "error" ? `error: ${progress.error}` : `status: ${progress.status}`;
    this.list.replaceChildren();
    progress.turns.forEach((question, i) => {
      const item = document.createElement("li");
      item.className = "turn";
      const answered = i < progress.turns.length - 1 || progress.status !== "interrogating";
      item.textContent = `${question}${answered ? " ✓" : " …"}`;
      this.list.appendChild(item);
    });
  }
}
