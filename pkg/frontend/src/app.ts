/**
 * DOM wiring for the studio. All interaction logic lives in StudioSession;
 * this file renders state and forwards events.
 */

import { StudioClient } from "./api.js";
import {
  fitWithin,
  SLIDER_STEP,
  StudioSession,
  type SessionView,
} from "./session.js";
import type { Frame, ReferenceEntry } from "./types.js";

const client = new StudioClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const gallery = el<HTMLDivElement>("gallery");
const galleryBanner = el<HTMLDivElement>("gallery-banner");
const retryButton = el<HTMLButtonElement>("retry-gallery");
const upload = el<HTMLInputElement>("upload");
const targetPreview = el<HTMLImageElement>("target-preview");
const slider = el<HTMLInputElement>("slider");
const sliderLabel = el<HTMLSpanElement>("slider-label");
const preview = el<HTMLImageElement>("preview");
const previewScore = el<HTMLSpanElement>("preview-score");
const strip = el<HTMLDivElement>("strip");
const stripButton = el<HTMLButtonElement>("strip-button");
const stripSteps = el<HTMLSelectElement>("strip-steps");
const errorBox = el<HTMLDivElement>("error");
const busy = el<HTMLDivElement>("busy");

slider.min = "0";
slider.max = "1";
slider.step = String(SLIDER_STEP);

function scoreLabel(frame: { display_score: number | null }): string {
  return frame.display_score === null
    ? ""
    : `score ${frame.display_score.toFixed(2)} / 5`;
}

const view: SessionView = {
  renderGallery(references: ReferenceEntry[], selectedId: string | null) {
    galleryBanner.hidden = true;
    gallery.replaceChildren(
      ...references.map((entry) => {
        const card = document.createElement("figure");
        card.className = entry.id === selectedId ? "card selected" : "card";
        const img = document.createElement("img");
        img.src = `data:image/png;base64,${entry.thumbnail}`;
        img.alt = `reference ${entry.id}`;
        const caption = document.createElement("figcaption");
        caption.textContent = scoreLabel(entry);
        card.append(img, caption);
        card.addEventListener("click", () => session.selectReference(entry.id));
        return card;
      }),
    );
  },
  renderGalleryError(message: string) {
    galleryBanner.hidden = false;
    galleryBanner.textContent = `gallery unavailable: ${message} — `;
    galleryBanner.append(retryButton);
    retryButton.hidden = false;
  },
  renderPreview(frame: Frame) {
    errorBox.hidden = true;
    preview.src = `data:image/png;base64,${frame.image}`;
    previewScore.textContent = scoreLabel(frame);
  },
  renderStrip(frames: Frame[]) {
    errorBox.hidden = true;
    strip.replaceChildren(
      ...frames.map((frame, index) => {
        const cell = document.createElement("figure");
        cell.className = "card";
        const img = document.createElement("img");
        img.src = `data:image/png;base64,${frame.image}`;
        img.alt = `w2 = ${frame.w2.toFixed(2)}`;
        const caption = document.createElement("figcaption");
        caption.textContent = `w₂ ${frame.w2.toFixed(2)} ${scoreLabel(frame)}`;
        cell.append(img, caption);
        cell.addEventListener("click", () => session.clickStripFrame(index));
        return cell;
      }),
    );
  },
  renderSlider(w2: number) {
    slider.value = String(w2);
    sliderLabel.textContent = w2.toFixed(2);
  },
  renderError(message: string) {
    errorBox.hidden = false;
    errorBox.textContent = message;
  },
  renderBusy(inFlight: boolean) {
    busy.hidden = !inFlight;
  },
};

const session = new StudioSession(client, view);

/** Downscale an upload so the longer side fits the service resolution. */
async function prepareUpload(file: File): Promise<Blob> {
  let maxDim = 512;
  try {
    const health = await client.health();
    maxDim = Math.max(...health.image_size);
  } catch {
    // keep the conservative default when the service is unreachable
  }
  const bitmap = await createImageBitmap(file);
  const { width, height } = fitWithin(bitmap.width, bitmap.height, maxDim);
  if (width === bitmap.width && height === bitmap.height) {
    return file;
  }
  const canvas = document.createElement("canvas");
  canvas.width = width;
  canvas.height = height;
  canvas.getContext("2d")!.drawImage(bitmap, 0, 0, width, height);
  return new Promise((resolve) =>
    canvas.toBlob((blob) => resolve(blob ?? file), "image/png"),
  );
}

upload.addEventListener("change", async () => {
  const file = upload.files?.[0];
  if (file === undefined) {
    return;
  }
  const prepared = await prepareUpload(file);
  session.setTarget(prepared);
  targetPreview.src = URL.createObjectURL(prepared);
});

slider.addEventListener("input", () => {
  session.dragSlider(Number(slider.value));
});
slider.addEventListener("change", () => {
  void session.commitSlider(Number(slider.value));
});

stripButton.addEventListener("click", () => {
  void session.requestStrip(Number(stripSteps.value));
});
retryButton.addEventListener("click", () => {
  void session.loadGallery();
});

void session.loadGallery();
