import { describe, expect, it, vi } from "vitest";

import { ServiceError, type BeautifyParams, type StudioClient } from "../src/api";
import {
  fitWithin,
  quantizeWeight,
  StudioSession,
  type SessionView,
} from "../src/session";
import type { BeautifyResponse, Frame, ReferenceEntry } from "../src/types";

function frame(w2: number, image = `img_${w2}`): Frame {
  return { w2, image, score: 2 + w2, display_score: 2 + w2 };
}

function ladder(weights: number[]): BeautifyResponse {
  return { frames: weights.map((w) => frame(w)), weights };
}

function reference(id: string, score: number): ReferenceEntry {
  return { id, thumbnail: `thumb_${id}`, score, display_score: score };
}

/** Records every view call so tests can assert exactly what was rendered. */
function recordingView() {
  return {
    renderGallery: vi.fn(),
    renderGalleryError: vi.fn(),
    renderPreview: vi.fn(),
    renderStrip: vi.fn(),
    renderSlider: vi.fn(),
    renderError: vi.fn(),
    renderBusy: vi.fn(),
  } satisfies SessionView;
}

interface FakeClientOptions {
  references?: ReferenceEntry[] | Error;
  beautify?: (params: BeautifyParams) => Promise<BeautifyResponse>;
}

function fakeClient(options: FakeClientOptions = {}) {
  const beautify = vi.fn(
    options.beautify ??
      (async (params: BeautifyParams) =>
        ladder(params.weights ?? [...Array(params.steps ?? 1).keys()].map(
          (k, _i, all) => (all.length === 1 ? 1 : k / (all.length - 1)),
        ))),
  );
  const references = vi.fn(async () => {
    if (options.references instanceof Error) {
      throw options.references;
    }
    return options.references ?? [];
  });
  const client = { beautify, references } as unknown as StudioClient;
  return { client, beautify, references };
}

function readySession(options: FakeClientOptions = {}) {
  const view = recordingView();
  const { client, beautify } = fakeClient(options);
  const session = new StudioSession(client, view);
  session.setTarget(new Blob(["target-bytes"], { type: "image/png" }));
  session.selectReference("abc123");
  return { session, view, beautify };
}

describe("gallery", () => {
  it("renders every reference card with pass-through scores", async () => {
    const refs = [1, 2, 3, 4, 5].map((i) => reference(`id${i}`, i));
    const view = recordingView();
    const { client } = fakeClient({ references: refs });
    const session = new StudioSession(client, view);

    await session.loadGallery();

    expect(view.renderGallery).toHaveBeenCalledWith(refs, null);
    const [rendered] = view.renderGallery.mock.calls[0]!;
    expect(rendered).toHaveLength(5);
    expect(rendered[2]).toBe(refs[2]); // the exact service payload, unaltered
  });

  it("selecting a card highlights exactly that card", async () => {
    const refs = [reference("a", 3), reference("b", 4)];
    const view = recordingView();
    const { client } = fakeClient({ references: refs });
    const session = new StudioSession(client, view);
    await session.loadGallery();

    session.selectReference("b");

    expect(view.renderGallery).toHaveBeenLastCalledWith(refs, "b");
  });

  it("keeps upload usable behind a retry banner when the service is down", async () => {
    const view = recordingView();
    const { client } = fakeClient({ references: new Error("connection refused") });
    const session = new StudioSession(client, view);

    await session.loadGallery();

    expect(view.renderGalleryError).toHaveBeenCalledOnce();
    expect(view.renderGallery).not.toHaveBeenCalled();
    session.setTarget(new Blob(["still-works"]));
    expect(session.state.target).not.toBeNull();
  });
});

describe("slider debounce", () => {
  it("issues no request while dragging, one on commit", async () => {
    const { session, beautify } = readySession();

    for (const detent of [0, 0.25, 0.5, 0.75]) {
      session.dragSlider(detent);
    }
    await session.commitSlider(1);

    expect(beautify).toHaveBeenCalledTimes(1);
  });

  it("a drag across five detents costs at most five requests", async () => {
    const { session, beautify } = readySession();

    for (const detent of [0, 0.25, 0.5, 0.75, 1]) {
      session.dragSlider(detent);
      await session.commitSlider(detent);
    }

    expect(beautify.mock.calls.length).toBeLessThanOrEqual(5);
  });

  it("mirrors the last committed weight in session state", async () => {
    const { session } = readySession();

    session.dragSlider(0.9); // display-only
    expect(session.state.sliderW2).toBe(1); // initial value untouched by drags

    await session.commitSlider(0.37);
    expect(session.state.sliderW2).toBe(0.37);
  });
});

describe("newest-wins rendering", () => {
  it("discards a stale response that lands after a newer commit", async () => {
    const pending = new Map<number, (r: BeautifyResponse) => void>();
    const { session, view } = readySession({
      beautify: (params) =>
        new Promise((resolve) => {
          pending.set(params.weights![0]!, resolve);
        }),
    });

    const first = session.commitSlider(0.3);
    const second = session.commitSlider(0.8);

    // the newer response arrives first; the older one straggles in later
    pending.get(0.8)!(ladder([0.8]));
    await second;
    pending.get(0.3)!(ladder([0.3]));
    await first;

    expect(view.renderPreview).toHaveBeenCalledTimes(1);
    const [shown] = view.renderPreview.mock.calls[0]!;
    expect(shown.w2).toBe(0.8);
    expect(session.state.inFlight).toBe(false);
  });

  it("aborts the in-flight request when a newer commit arrives", async () => {
    const signals: AbortSignal[] = [];
    const { session } = readySession({
      beautify: (params) => {
        signals.push(params.signal!);
        return Promise.resolve(ladder(params.weights!));
      },
    });

    const first = session.commitSlider(0.2);
    const second = session.commitSlider(0.9);
    await Promise.all([first, second]);

    expect(signals[0]!.aborted).toBe(true);
    expect(signals[1]!.aborted).toBe(false);
  });
});

describe("w2 = 0 boundary", () => {
  it("renders the service's reconstruction frame verbatim", async () => {
    const recon: Frame = {
      w2: 0,
      image: "RECONSTRUCTION_PNG_B64",
      score: null,
      display_score: null,
    };
    const { session, view, beautify } = readySession({
      beautify: async () => ({ frames: [recon], weights: [0] }),
    });

    await session.commitSlider(0);

    expect(beautify.mock.calls[0]![0].weights).toEqual([0]);
    const [shown] = view.renderPreview.mock.calls[0]!;
    expect(shown).toBe(recon); // the exact response frame, nothing fabricated
    expect(shown.image).toBe("RECONSTRUCTION_PNG_B64");
  });
});

describe("sequence strip", () => {
  it("renders steps=5 thumbnails in ascending w2", async () => {
    const { session, view, beautify } = readySession();

    await session.requestStrip(5);

    expect(beautify.mock.calls[0]![0].steps).toBe(5);
    const [frames] = view.renderStrip.mock.calls[0]!;
    expect(frames.map((f: Frame) => f.w2)).toEqual([0, 0.25, 0.5, 0.75, 1]);
  });

  it("clicking frame 3 of 5 sets the slider to 0.5", async () => {
    const { session, view } = readySession();
    await session.requestStrip(5);

    session.clickStripFrame(2); // third frame, zero-indexed

    expect(session.state.sliderW2).toBe(0.5);
    expect(view.renderSlider).toHaveBeenLastCalledWith(0.5);
    const [shown] = view.renderPreview.mock.calls.at(-1)!;
    expect(shown.w2).toBe(0.5); // previews the already-fetched frame
  });

  it("issues no extra request on a strip click", async () => {
    const { session, beautify } = readySession();
    await session.requestStrip(3);

    session.clickStripFrame(1);

    expect(beautify).toHaveBeenCalledTimes(1);
  });
});

describe("errors", () => {
  it("shows the weight constraint inline on a 422", async () => {
    const { session, view } = readySession({
      beautify: async () => {
        throw new ServiceError(
          422,
          "invalid_weights",
          "weights must increase",
          "weights are a strictly increasing list of w2 in [0, 1] with w1 = 1 - w2; w1 + w2 = 1",
        );
      },
    });

    await session.commitSlider(0.5);

    expect(view.renderPreview).not.toHaveBeenCalled();
    const [message] = view.renderError.mock.calls[0]!;
    expect(message).toContain("w1 + w2 = 1");
  });

  it("asks for a target and reference before requesting", async () => {
    const view = recordingView();
    const { client, beautify } = fakeClient();
    const session = new StudioSession(client, view);

    await session.commitSlider(0.5);

    expect(beautify).not.toHaveBeenCalled();
    expect(view.renderError).toHaveBeenCalledOnce();
  });
});

describe("weight quantization", () => {
  it("snaps to the 0.01 slider resolution and clamps to [0, 1]", () => {
    expect(quantizeWeight(0.333)).toBe(0.33);
    expect(quantizeWeight(0.005)).toBe(0.01);
    expect(quantizeWeight(-0.2)).toBe(0);
    expect(quantizeWeight(1.7)).toBe(1);
  });
});

describe("upload downscaling geometry", () => {
  it("fits the longer side to the bound and preserves aspect", () => {
    expect(fitWithin(1024, 512, 256)).toEqual({ width: 256, height: 128 });
    expect(fitWithin(300, 900, 300)).toEqual({ width: 100, height: 300 });
  });

  it("never upscales", () => {
    expect(fitWithin(100, 60, 256)).toEqual({ width: 100, height: 60 });
  });
});
