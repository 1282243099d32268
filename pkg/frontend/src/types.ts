export type Status = "proposed" | "accepted" | "corrected" | "rejected";
export type Source = "model" | "human";

export interface BoxRecord {
  class_id: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  status: Status;
  source: Source;
}

export interface LabelsDoc {
  revision: number;
  annotations: BoxRecord[];
}

export interface ManifestImage {
  id: string;
  width: number;
  height: number;
  done: boolean;
  revision: number;
  annotations: number;
}

export interface Manifest {
  classes: string[];
  images: ManifestImage[];
}

export interface Progress {
  done: number;
  total: number;
}
