// Application controller: owns the view model, talks to the service, and
// re-renders after every state change. One in-flight request per action;
// stale responses are discarded by sequence number.

import { ApiClient, ApiError, pngDataUrl, type ExplanationMethod } from './api.js';
import { applyPrediction, initialViewModel, RequestSequencer, type SessionViewModel } from './state.js';
import { render } from './render.js';

export class App {
  vm: SessionViewModel = initialViewModel();
  private currentImage: Blob | null = null;
  private predictSeq = new RequestSequencer();
  private explainSeq = new RequestSequencer();

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  private update(patch: Partial<SessionViewModel>): void {
    this.vm = { ...this.vm, ...patch };
    render(this.root, this.vm);
  }

  /** Upload one file, run the gate + classifier, and render the results. */
  async uploadAndPredict(file: File | Blob): Promise<void> {
    const name = file instanceof File ? file.name : 'image';
    if (!looksLikeImage(file)) {
      this.update({ error: `"${name}" is not a PNG or PGM image`, busy: false });
      return;
    }
    const seq = this.predictSeq.next();
    this.currentImage = file;
    this.update({
      busy: true,
      error: null,
      fileName: name,
      previewUrl: await blobDataUrl(file),
      verdict: null,
      predictions: null,
      explanation: null,
    });
    try {
      const response = await this.api.predict(file);
      if (!this.predictSeq.isCurrent(seq)) return; // superseded upload
      this.vm = applyPrediction(this.vm, response);
      render(this.root, this.vm);
    } catch (err) {
      if (!this.predictSeq.isCurrent(seq)) return;
      this.update({ busy: false, error: describeError(err) });
    }
  }

  /** Fetch (or hide, when re-toggling the active one) an explanation overlay. */
  async toggleExplanation(classIndex: number, method: ExplanationMethod): Promise<void> {
    if (!this.currentImage || !this.vm.predictions) return;
    const active = this.vm.explanation;
    if (active && active.classIndex === classIndex && active.method === method) {
      this.update({ explanation: null });
      return;
    }
    const seq = this.explainSeq.next();
    this.update({ busy: true, error: null });
    try {
      const png = await this.api.explain(this.currentImage, classIndex, method);
      if (!this.explainSeq.isCurrent(seq)) return;
      this.update({
        busy: false,
        overlayVisible: true,
        explanation: { classIndex, method, overlayUrl: pngDataUrl(png) },
      });
    } catch (err) {
      if (!this.explainSeq.isCurrent(seq)) return;
      if (err instanceof ApiError && err.kind === 'IncompatibleHead') {
        this.update({
          busy: false,
          camDisabledReason: 'this model head does not support class activation maps',
        });
        return;
      }
      this.update({ busy: false, error: describeError(err) });
    }
  }

  setOverlayVisible(visible: boolean): void {
    this.update({ overlayVisible: visible });
  }

  setOverlayOpacity(opacity: number): void {
    this.update({ overlayOpacity: Math.min(1, Math.max(0, opacity)) });
  }
}

function looksLikeImage(file: File | Blob): boolean {
  if (file.type && (file.type.startsWith('image/') || file.type === 'application/octet-stream')) return true;
  if (file instanceof File) return /\.(png|pgm)$/i.test(file.name);
  return !file.type;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `service error: ${err.message}`;
  if (err instanceof Error) return `service unreachable: ${err.message}`;
  return 'service unreachable';
}

async function blobDataUrl(blob: Blob): Promise<string> {
  const bytes = new Uint8Array(await blob.arrayBuffer());
  return pngDataUrl(bytes);
}
