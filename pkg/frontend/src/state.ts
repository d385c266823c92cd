// Session view model: everything the page shows derives from this object.
// The diagnosis panel is hidden whenever the gate rejected the image.

import type { ClassPrediction, ExplanationMethod, OodVerdict, PredictResponse } from './api.js';

export interface ExplanationState {
  classIndex: number;
  method: ExplanationMethod;
  overlayUrl: string;
}

export interface SessionViewModel {
  previewUrl: string | null;
  fileName: string | null;
  verdict: OodVerdict | null;
  predictions: ClassPrediction[] | null; // sorted by calibrated probability, descending
  explanation: ExplanationState | null;
  overlayVisible: boolean;
  overlayOpacity: number;
  camDisabledReason: string | null;
  error: string | null;
  busy: boolean;
}

export function initialViewModel(): SessionViewModel {
  return {
    previewUrl: null,
    fileName: null,
    verdict: null,
    predictions: null,
    explanation: null,
    overlayVisible: true,
    overlayOpacity: 0.65,
    camDisabledReason: null,
    error: null,
    busy: false,
  };
}

export function diagnosisVisible(vm: SessionViewModel): boolean {
  if (vm.predictions === null) return false;
  return vm.verdict === null || vm.verdict.admitted;
}

export function applyPrediction(vm: SessionViewModel, response: PredictResponse): SessionViewModel {
  const sorted = response.predictions
    ? [...response.predictions].sort((a, b) => b.calibrated_probability - a.calibrated_probability)
    : null;
  return {
    ...vm,
    verdict: response.ood,
    predictions: sorted,
    explanation: null, // a new image invalidates any previous overlay
    camDisabledReason: null,
    error: null,
    busy: false,
  };
}

/** Stale-response guard: only the latest request sequence number may render. */
export class RequestSequencer {
  private counter = 0;

  next(): number {
    return ++this.counter;
  }

  isCurrent(id: number): boolean {
    return id === this.counter;
  }
}
