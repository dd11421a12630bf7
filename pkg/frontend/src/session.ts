/**
 * Studio session state machine, free of DOM dependencies so the interaction
 * contracts are testable headless. The DOM layer implements SessionView and
 * forwards user events; all rendering data is passed through verbatim from
 * service responses.
 */

import { ServiceError, StudioClient } from "./api.js";
import type { Frame, ReferenceEntry } from "./types.js";

/** Slider granularity: one percent of the blend weight. */
export const SLIDER_STEP = 0.01;

export interface SessionView {
  renderGallery(references: ReferenceEntry[], selectedId: string | null): void;
  /** Service unreachable while loading the gallery; upload must stay usable. */
  renderGalleryError(message: string): void;
  /** Show one beautified frame (and its score) as the main preview. */
  renderPreview(frame: Frame): void;
  /** Show a multi-weight ladder, already ordered by ascending w2. */
  renderStrip(frames: Frame[]): void;
  /** Move the slider control; fired when state changes it (strip clicks). */
  renderSlider(w2: number): void;
  renderError(message: string): void;
  renderBusy(inFlight: boolean): void;
}

export interface SessionState {
  target: Blob | null;
  referenceId: string | null;
  /** Mirrors the w2 of the most recent committed request. */
  sliderW2: number;
  frames: Frame[];
  inFlight: boolean;
}

/** Round a raw slider position to the studio's weight granularity. */
export function quantizeWeight(w2: number): number {
  const snapped = Math.round(w2 / SLIDER_STEP) * SLIDER_STEP;
  return Math.min(1, Math.max(0, Number(snapped.toFixed(2))));
}

/**
 * Scale (width, height) to fit within maxDim on the longer side, preserving
 * aspect ratio. Never upscales.
 */
export function fitWithin(
  width: number,
  height: number,
  maxDim: number,
): { width: number; height: number } {
  const longest = Math.max(width, height);
  if (longest <= maxDim) {
    return { width, height };
  }
  const scale = maxDim / longest;
  return {
    width: Math.max(1, Math.round(width * scale)),
    height: Math.max(1, Math.round(height * scale)),
  };
}

export class StudioSession {
  readonly state: SessionState = {
    target: null,
    referenceId: null,
    sliderW2: 1,
    frames: [],
    inFlight: false,
  };

  private references: ReferenceEntry[] = [];
  /** Commit counter; a response renders only if it is still the newest. */
  private sequence = 0;
  private controller: AbortController | null = null;

  constructor(
    private readonly client: StudioClient,
    private readonly view: SessionView,
  ) {}

  async loadGallery(): Promise<void> {
    try {
      this.references = await this.client.references();
      this.view.renderGallery(this.references, this.state.referenceId);
    } catch (error) {
      this.view.renderGalleryError(describe(error));
    }
  }

  selectReference(id: string): void {
    this.state.referenceId = id;
    this.view.renderGallery(this.references, id);
  }

  setTarget(image: Blob): void {
    this.state.target = image;
  }

  /**
   * Live drag feedback: no request is issued. Requests happen only on
   * commit (slider release), so a drag costs at most one round trip.
   */
  dragSlider(w2: number): void {
    this.view.renderSlider(quantizeWeight(w2));
  }

  /** Slider released: request exactly one frame at this weight. */
  async commitSlider(w2: number): Promise<void> {
    const weight = quantizeWeight(w2);
    this.state.sliderW2 = weight;
    const frames = await this.issue({ weights: [weight] });
    if (frames !== null && frames[0] !== undefined) {
      this.state.frames = frames;
      this.view.renderPreview(frames[0]);
    }
  }

  /** Request an evenly spaced ladder of `steps` weights from 0 to 1. */
  async requestStrip(steps: number): Promise<void> {
    const frames = await this.issue({ steps });
    if (frames !== null) {
      this.state.frames = frames;
      this.view.renderStrip(frames);
    }
  }

  /**
   * Clicking the k-th strip frame moves the slider to that frame's own
   * weight (for an n-step ladder, k / (n - 1)) and previews it — no new
   * request, no recomputed numbers.
   */
  clickStripFrame(index: number): void {
    const frame = this.state.frames[index];
    if (frame === undefined) {
      return;
    }
    this.state.sliderW2 = frame.w2;
    this.view.renderSlider(frame.w2);
    this.view.renderPreview(frame);
  }

  /**
   * Issue a beautify request under the session concurrency rule: at most
   * one in flight, newest wins. A superseded request is aborted, and a
   * response that lands after a newer commit is discarded.
   */
  private async issue(request: {
    weights?: number[];
    steps?: number;
  }): Promise<Frame[] | null> {
    const { target, referenceId } = this.state;
    if (target === null || referenceId === null) {
      this.view.renderError("choose a target image and a reference first");
      return null;
    }
    this.controller?.abort();
    this.controller = new AbortController();
    const ticket = ++this.sequence;
    this.state.inFlight = true;
    this.view.renderBusy(true);
    try {
      const response = await this.client.beautify({
        target,
        referenceId,
        weights: request.weights,
        steps: request.steps,
        wantScores: true,
        signal: this.controller.signal,
      });
      if (ticket !== this.sequence) {
        return null; // a newer commit superseded this response
      }
      return response.frames;
    } catch (error) {
      if (ticket !== this.sequence || isAbort(error)) {
        return null;
      }
      this.view.renderError(describe(error));
      return null;
    } finally {
      if (ticket === this.sequence) {
        this.state.inFlight = false;
        this.view.renderBusy(false);
      }
    }
  }
}

function isAbort(error: unknown): boolean {
  return error instanceof DOMException && error.name === "AbortError";
}

function describe(error: unknown): string {
  if (error instanceof ServiceError) {
    // e.g. invalid weights come back restating the w1 + w2 = 1 constraint
    return error.constraint !== undefined
      ? `${error.message} (${error.constraint})`
      : error.message;
  }
  return error instanceof Error ? error.message : String(error);
}
