// Thin typed wrappers over the review service endpoints.

import type { LabelsDoc, Manifest, Progress } from "./types.js";

export type SaveResult =
  | { kind: "saved"; revision: number }
  | { kind: "conflict"; revision: number }
  | { kind: "failed"; message: string };

export function imageUrl(imageId: string): string {
  return `/api/image/${encodeURIComponent(imageId)}`;
}

async function getJson<T>(url: string): Promise<T> {
  const resp = await fetch(url);
  if (!resp.ok) throw new Error(`${url}: HTTP ${resp.status}`);
  return (await resp.json()) as T;
}

export function getManifest(): Promise<Manifest> {
  return getJson<Manifest>("/api/manifest");
}

export function getProgress(): Promise<Progress> {
  return getJson<Progress>("/api/progress");
}

export function getLabels(imageId: string): Promise<LabelsDoc> {
  return getJson<LabelsDoc>(`/api/labels/${encodeURIComponent(imageId)}`);
}

export async function putLabels(imageId: string, body: LabelsDoc): Promise<SaveResult> {
  let resp: Response;
  try {
    resp = await fetch(`/api/labels/${encodeURIComponent(imageId)}`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch (err) {
    return { kind: "failed", message: String(err) };
  }
  if (resp.status === 200) {
    const doc = (await resp.json()) as { revision: number };
    return { kind: "saved", revision: doc.revision };
  }
  if (resp.status === 409) {
    const doc = (await resp.json()) as { revision: number };
    return { kind: "conflict", revision: doc.revision };
  }
  return { kind: "failed", message: `HTTP ${resp.status}` };
}

export async function markComplete(imageId: string): Promise<Progress> {
  const resp = await fetch(`/api/labels/${encodeURIComponent(imageId)}/complete`, {
    method: "POST",
  });
  if (!resp.ok) throw new Error(`complete: HTTP ${resp.status}`);
  return (await resp.json()) as Progress;
}
