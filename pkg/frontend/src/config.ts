/**
 * Console configuration: one base URL names the whole backend.
 *
 * Resolution order: `?base=` query parameter, then the value persisted in
 * localStorage, then the default local gateway.
 */

export const DEFAULT_BASE_URL = "http://127.0.0.1:8090";
const STORAGE_KEY = "caplab.baseUrl";

export function normalizeBaseUrl(raw: string): string {
  return raw.trim().replace(/\/+$/, "");
}

export function resolveBaseUrl(
  search: string = typeof location === "undefined" ? "" : location.search,
  storage: Pick<Storage, "getItem"> | null = typeof localStorage === "undefined"
    ? null
    : localStorage,
): string {
  const fromQuery = new URLSearchParams(search).get("base");
  if (fromQuery) return normalizeBaseUrl(fromQuery);
  const stored = storage?.getItem(STORAGE_KEY);
  if (stored) return normalizeBaseUrl(stored);
  return DEFAULT_BASE_URL;
}

export function persistBaseUrl(baseUrl: string, storage: Pick<Storage, "setItem">): void {
  storage.setItem(STORAGE_KEY, normalizeBaseUrl(baseUrl));
}

/** The gateway's WebSocket endpoint for a given HTTP base URL. */
export function wsUrl(baseUrl: string): string {
  return normalizeBaseUrl(baseUrl).replace(/^http/, "ws") + "/ws";
}
