/** Payload shapes of the beautification service, mirrored field-for-field. */

export interface HealthInfo {
  status: string;
  digests: Record<string, string | null>;
  /** Working resolution as [height, width]; uploads are resized to this. */
  image_size: [number, number];
  gallery_size: number;
}

export interface ReferenceEntry {
  /** 16-hex content digest identifying the gallery image. */
  id: string;
  /** Base64 PNG thumbnail. */
  thumbnail: string;
  /** Raw predicted beauty score; null when the service has no scoring head. */
  score: number | null;
  /** Score clamped to the displayable [1, 5] rating scale. */
  display_score: number | null;
}

export interface ScoreResponse {
  score: number;
  display_score: number;
}

export interface Frame {
  /** Blend weight toward the reference style; 0 = untouched, 1 = full transfer. */
  w2: number;
  /** Base64 PNG of the beautified output. */
  image: string;
  score: number | null;
  display_score: number | null;
}

export interface BeautifyResponse {
  frames: Frame[];
  weights: number[];
}

export interface ErrorEnvelope {
  error: {
    code: string;
    message: string;
    constraint?: string;
  };
}
