// Edit session state: append-only history, latest-wins submission queue.

import type { ApiClient, SynthesizeResponse } from "./api.js";

export interface HistoryEntry {
  caption: string;
  image: string; // base64 PNG
  pose: number[][] | null;
  orientation: number;
  latencyMs: number;
  timestamp: number;
}

export interface SessionState {
  referenceImage: string | null;
  draftCaption: string;
  history: ReadonlyArray<HistoryEntry>;
  inFlight: boolean;
  error: string | null;
}

export const MAX_HISTORY = 50;

export class EditSession {
  private referenceImage: string | null = null;
  private draftCaption = "";
  private history: HistoryEntry[] = [];
  private inFlight = false;
  private queued: string | null = null;
  private error: string | null = null;
  private listeners: Array<(state: SessionState) => void> = [];

  constructor(
    private readonly client: Pick<ApiClient, "synthesize">,
    private readonly maxHistory: number = MAX_HISTORY,
    private readonly now: () => number = () => Date.now(),
  ) {}

  get state(): SessionState {
    return {
      referenceImage: this.referenceImage,
      draftCaption: this.draftCaption,
      history: this.history.slice(),
      inFlight: this.inFlight,
      error: this.error,
    };
  }

  onChange(listener: (state: SessionState) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snapshot = this.state;
    for (const listener of this.listeners) listener(snapshot);
  }

  setReference(imageBase64: string): void {
    this.referenceImage = imageBase64;
    this.emit();
  }

  setDraft(caption: string): void {
    this.draftCaption = caption;
    this.emit();
  }

  insertPhrase(phrase: string): void {
    const draft = this.draftCaption.trim();
    this.draftCaption = draft.length > 0 ? `${draft}, ${phrase}` : phrase;
    this.emit();
  }

  /** Submit the caption; while a request is in flight the latest submission
   * waits and replaces any earlier queued one. */
  async submit(caption?: string): Promise<void> {
    const text = caption ?? this.draftCaption;
    if (!this.referenceImage) {
      this.error = "upload a reference image first";
      this.emit();
      return;
    }
    if (text.trim().length === 0) {
      this.error = "caption must not be empty";
      this.emit();
      return;
    }
    if (this.inFlight) {
      this.queued = text;
      return;
    }
    this.inFlight = true;
    this.error = null;
    this.emit();
    try {
      const resp: SynthesizeResponse = await this.client.synthesize(this.referenceImage, text);
      this.history.push({
        caption: text,
        image: resp.image,
        pose: resp.pose,
        orientation: resp.orientation,
        latencyMs: resp.latency_ms,
        timestamp: this.now(),
      });
      if (this.history.length > this.maxHistory) {
        this.history = this.history.slice(this.history.length - this.maxHistory);
      }
    } catch (err) {
      // the draft caption stays untouched so the user can retry the edit
      this.error = err instanceof Error ? err.message : String(err);
    } finally {
      this.inFlight = false;
      this.emit();
    }
    if (this.queued !== null) {
      const next = this.queued;
      this.queued = null;
      await this.submit(next);
    }
  }
}
