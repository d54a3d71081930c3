import { ApiClient, ApiConfig } from "./api.js";
import { ChatPanel } from "./chatPanel.js";
import { ReportView } from "./reportView.js";
import { Timeline } from "./timeline.js";

/** Wire the full workflow into a host element: upload a contract, chat to
 * assemble the brief, watch the interrogation timeline, read the report. */
export class App {
  readonly root: HTMLElement;
  private api: ApiClient;
  private timeline: Timeline | null = null;

  constructor(host: HTMLElement, config: ApiConfig) {
    this.root = host;
    this.api = new ApiClient(config);
    this.renderUpload();
  }

  private renderUpload(): void {
    const form = document.createElement("div");
    form.className = "upload";
    const area = document.createElement("textarea");
    area.placeholder = "Paste the contract text here…";
    const button = document.createElement("button");
    button.textContent = "Upload contract";
    button.addEventListener("click", () => void this.upload(area.value));
    form.append(area, button);
    this.root.appendChild(form);
  }

  private async upload(text: string): Promise<void> {
    if (!text.trim()) return;
    const meta = await this.api.uploadDocument(text);
    const { session_id } = await this.api.createSession(meta.document_id);
    this.root.replaceChildren();
    this.startSession(session_id);
  }

  private startSession(sessionId: string): void {
    const reportView = new ReportView();
    const timeline = new Timeline({
      api: this.api,
      sessionId,
      onDone: (progress) => {
        if (progress.status === "done") {
          void this.api.report(sessionId).then((r) => reportView.render(r));
        }
      },
    });
    this.timeline = timeline;
    const chat = new ChatPanel({
      api: this.api,
      sessionId,
      onFinalized: () => timeline.start(),
    });
    this.root.append(chat.root, timeline.root, reportView.root);
  }

  /** Stop background polling (to be called on navigation). */
  teardown(): void {
    this.timeline?.stop();
  }
}
