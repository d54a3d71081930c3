import { ApiClient } from "./api.js";

export interface ChatPanelOptions {
  api: ApiClient;
  sessionId: string;
  /** Called once the brief is finalized, to start interrogation. */
  onFinalized: () => void;
}

interface Message {
  role: "user" | "assistant" | "error";
  text: string;
}

/** Intake dialogue: send messages, render replies, and finalize. The
 * finalize action stays disabled until at least one message round-trips,
 * mirroring the server's "empty session cannot finalize" invariant. */
export class ChatPanel {
  readonly root: HTMLElement;
  private transcript: HTMLElement;
  private input: HTMLInputElement;
  private sendButton: HTMLButtonElement;
  private finalizeButton: HTMLButtonElement;
  private messages: Message[] = [];
  private busy = false;

  constructor(private options: ChatPanelOptions) {
    this.root = document.createElement("section");
    this.root.className = "chat-panel";

    this.transcript = document.createElement("div");
    this.transcript.className = "transcript";

    this.input = document.createElement("input");
    this.input.type = "text";
    this.input.placeholder = "Describe your question about the contract…";

    this.sendButton = document.createElement("button");
    this.sendButton.textContent = "Send";
    this.sendButton.addEventListener("click", () => void this.send());

    this.finalizeButton = document.createElement("button");
    this.finalizeButton.textContent = "Finalize & Analyze";
    this.finalizeButton.disabled = true;
    this.finalizeButton.addEventListener("click", () => void this.finalize());

    this.root.append(this.transcript, this.input, this.sendButton, this.finalizeButton);
  }

  get transcriptMessages(): readonly Message[] {
    return this.messages;
  }

  async send(): Promise<void> {
    const text = this.input.value.trim();
    if (!text || this.busy) return;
    this.busy = true;
    this.push({ role: "user", text });
    this.input.value = "";
    try {
      const { reply } = await this.options.api.sendMessage(this.options.sessionId, text);
      this.push({ role: "assistant", text: reply ?? "" });
      this.finalizeButton.disabled = false;
    } catch (err) {
      this.pushError(err, () => void this.retrySend(text));
    } finally {
      this.busy = false;
    }
  }

  private async retrySend(text: string): Promise<void> {
    try {
      const { reply } = await this.options.api.sendMessage(this.options.sessionId, text);
      this.push({ role: "assistant", text: reply ?? "" });
      this.finalizeButton.disabled = false;
    } catch (err) {
      this.pushError(err, () => void this.retrySend(text));
    }
  }

  async finalize(): Promise<void> {
    if (this.finalizeButton.disabled) return;
    try {
      await this.options.api.sendMessage(this.options.sessionId, null);
      await this.options.api.interrogate(this.options.sessionId);
      this.finalizeButton.disabled = true;
      this.input.disabled = true;
      this.sendButton.disabled = true;
      this.options.onFinalized();
    } catch (err) {
      this.pushError(err, () => void this.finalize());
    }
  }

  private push(message: Message): void {
    this.messages.push(message);
    const bubble = document.createElement("div");
    bubble.className = `message ${message.role}`;
    bubble.textContent = message.text;
    this.transcript.appendChild(bubble);
  }

  private pushError(err: unknown, retry: () => void): void {
    const text = err instanceof Error ? err.message : String(err);
    this.messages.push({ role: "error", text });
    const bubble = document.createElement("div");
    bubble.className = "message error";
    bubble.textContent = text;
    const retryButton = document.createElement("button");
    retryButton.textContent = "Retry";
    retryButton.addEventListener("click", retry);
    bubble.appendChild(retryButton);
    this.transcript.appendChild(bubble);
  }
}
