// Annotation session state machine.
//
// One candidate is shown at a time; submissions are serialized (the next
// fetch awaits the label acknowledgment).  Skips are client-side: the
// skip list rides along on /api/next.  Undo reloads the previous
// candidate with its label editable; a re-submission supersedes it
// server-side, so no client-only state survives a reload.

import { ApiClient, NextResponse } from "./api.js";
import type { Action } from "./keys.js";

export type Submitted = { candidateId: string; label: boolean; view: NextResponse };

export type SessionState =
  | { kind: "loading" }
  | { kind: "annotating"; view: NextResponse; editing: Submitted | null }
  | { kind: "exhausted"; view: NextResponse }
  | { kind: "error"; message: string };

export class AnnotationSession {
  state: SessionState = { kind: "loading" };
  submitted: Submitted[] = [];
  skipped: string[] = [];
  private busy = false;

  constructor(
    private client: ApiClient,
    private annotator: string = "anonymous",
    private onChange: (state: SessionState) => void = () => {},
  ) {}

  private setState(state: SessionState): void {
    this.state = state;
    this.onChange(state);
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  async loadNext(): Promise<void> {
    this.setState({ kind: "loading" });
    try {
      const view = await this.client.fetchNext(this.skipped);
      if (view.exhausted) {
        this.setState({ kind: "exhausted", view });
      } else {
        this.setState({ kind: "annotating", view, editing: null });
      }
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
    }
  }

  async handleKey(key: Action | null): Promise<void> {
    if (!key || this.busy) {
      return;
    }
    this.busy = true;
    try {
      switch (key) {
        case "label-true":
          await this.submit(true);
          break;
        case "label-false":
          await this.submit(false);
          break;
        case "skip":
          await this.skip();
          break;
        case "undo":
          await this.undoLast();
          break;
      }
    } finally {
      this.busy = false;
    }
  }

  async submit(label: boolean): Promise<void> {
    if (this.state.kind !== "annotating") {
      return;
    }
    const view = this.state.view;
    const candidateId = view.candidate_id!;
    try {
      await this.client.postLabel(candidateId, label, this.annotator);
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
      return;
    }
    this.submitted.push({ candidateId, label, view });
    await this.loadNext();
  }

  async skip(): Promise<void> {
    if (this.state.kind !== "annotating") {
      return;
    }
    this.skipped.push(this.state.view.candidate_id!);
    await this.loadNext();
  }

  async undoLast(): Promise<void> {
    const last = this.submitted.pop();
    if (!last) {
      return;
    }
    // Reload the previous candidate with its label editable; the next
    // submission supersedes the stored record.
    this.setState({ kind: "annotating", view: last.view, editing: last });
  }

  async retry(): Promise<void> {
    await this.loadNext();
  }
}
