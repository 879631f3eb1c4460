/** Pure formatting helpers shared by the view renderers. */

const SIZE_UNITS = ["B", "KiB", "MiB", "GiB"];

/** Human-scale byte count: 0 B, 731 B, 1.4 KiB, 12.0 MiB. */
export function bytesLabel(size: number): string {
  if (!Number.isFinite(size) || size < 0) {
    return "? B";
  }
  let value = size;
  let unit = 0;
  while (value >= 1024 && unit < SIZE_UNITS.length - 1) {
    value /= 1024;
    unit += 1;
  }
  const text = unit === 0 ? String(Math.round(value)) : value.toFixed(1);
  return `${text} ${SIZE_UNITS[unit]}`;
}

/** True for a lowercase 64-character hex digest. */
export function isHexDigest(text: string): boolean {
  return /^[0-9a-f]{64}$/.test(text);
}

/** Shortened digest for tables; the full value stays in a title attribute. */
export function shortDigest(digest: string): string {
  return digest.length <= 16 ? digest : `${digest.slice(0, 16)}…`;
}

/** Escape a string for interpolation into HTML text or attribute values. */
export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** Strip the sub-second tail off an ISO timestamp for display. */
export function timeLabel(iso: string): string {
  const m = /^(\d{4}-\d{2}-\d{2})T(\d{2}:\d{2}:\d{2})/.exec(iso);
  return m ? `${m[1]} ${m[2]}Z` : iso;
}
