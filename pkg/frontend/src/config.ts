// Single base-URL setting: where the local prediction service listens.
// Override with ?service=<url> or localStorage key "xraykit.service".

export const DEFAULT_SERVICE_URL = 'http://127.0.0.1:8417';

export function serviceBaseUrl(): string {
  try {
    const fromQuery = new URLSearchParams(window.location.search).get('service');
    if (fromQuery) return fromQuery;
    const stored = window.localStorage.getItem('xraykit.service');
    if (stored) return stored;
  } catch {
    // non-browser context (tests); fall through
  }
  return DEFAULT_SERVICE_URL;
}
