/**
 * Person-name extraction from synopsis text.
 *
 * Heuristic recognizer: after HTML stripping and unicode
 * normalization, a person name is a run of two or more capitalized
 * words, optionally joined by lowercase particles (van, de, ...), with
 * leading titles (Dr, Sir, ...) dropped. No model, fully deterministic;
 * the provenance sidecar records the backend id.
 */

export const NER_ID = "caps-heuristic-v1";

const ENTITIES: Record<string, string> = {
  amp: "&",
  lt: "<",
  gt: ">",
  quot: '"',
  apos: "'",
  nbsp: " ",
};

export function stripHtml(text: string): string {
  let out = text.replace(/<(script|style)\b[^>]*>[\s\S]*?<\/\1\s*>/gi, " ");
  out = out.replace(/<[^>]*>/g, " ");
  out = out.replace(/&#x([0-9a-fA-F]+);/g, (_, hex: string) => String.fromCodePoint(parseInt(hex, 16)));
  out = out.replace(/&#(\d+);/g, (_, dec: string) => String.fromCodePoint(parseInt(dec, 10)));
  out = out.replace(/&([a-zA-Z]+);/g, (match, name: string) => ENTITIES[name.toLowerCase()] ?? match);
  return out;
}

export function normalizeText(text: string): string {
  return text.normalize("NFC").replace(/\s+/g, " ").trim();
}

const PARTICLES = new Set(["de", "del", "der", "den", "di", "da", "du", "la", "le", "van", "von", "bin", "al", "ter"]);

const TITLES = new Set([
  "mr",
  "mrs",
  "ms",
  "miss",
  "dr",
  "sir",
  "dame",
  "lord",
  "lady",
  "professor",
  "prof",
  "president",
  "captain",
]);

// capitalized words that open sentences far more often than names
const STOPWORDS = new Set([
  "the",
  "a",
  "an",
  "in",
  "on",
  "at",
  "and",
  "but",
  "or",
  "by",
  "with",
  "from",
  "for",
  "as",
  "his",
  "her",
  "their",
  "this",
  "that",
  "these",
  "those",
  "it",
  "he",
  "she",
  "they",
  "we",
  "i",
  "you",
  "when",
  "where",
  "after",
  "before",
  "during",
]);

const CAP_WORD = /^[A-ZÀ-Þ][a-zß-ÿ]+(?:[-'][A-ZÀ-Þ]?[a-zß-ÿ]+)*$/;

function cleanToken(token: string): string {
  return token.replace(/^[("'‘“]+/, "").replace(/[.,!?;:)("'’”]+$/, "");
}

function endsClause(token: string): boolean {
  return /[.,!?;:]["'’”)]*$/.test(token);
}

/**
 * Extract person-name strings from one synopsis, in order of first
 * appearance, de-duplicated case-insensitively. Clause punctuation
 * ends a run, so "Later, Marie Curie" yields only "Marie Curie".
 */
export function extractPersonNames(synopsis: string): string[] {
  const text = normalizeText(stripHtml(synopsis));
  if (text === "") {
    return [];
  }
  const raw = text.split(" ");
  const tokens = raw.map(cleanToken);
  const stops = raw.map(endsClause);
  const names: string[] = [];
  const seen = new Set<string>();

  let i = 0;
  while (i < tokens.length) {
    const token = tokens[i]!;
    if (!CAP_WORD.test(token) || STOPWORDS.has(token.toLowerCase())) {
      i += 1;
      continue;
    }
    // collect the run: capitalized words, particles allowed inside
    const run: string[] = [token];
    let j = i + 1;
    while (j < tokens.length && !stops[j - 1]) {
      const next = tokens[j]!;
      if (CAP_WORD.test(next) && !STOPWORDS.has(next.toLowerCase())) {
        run.push(next);
        j += 1;
      } else if (
        PARTICLES.has(next) &&
        !stops[j] &&
        j + 1 < tokens.length &&
        CAP_WORD.test(tokens[j + 1]!)
      ) {
        run.push(next);
        run.push(tokens[j + 1]!);
        j += 2;
      } else {
        break;
      }
    }
    let start = 0;
    while (start < run.length && TITLES.has(run[start]!.toLowerCase())) {
      start += 1;
    }
    const name = run.slice(start);
    const capCount = name.filter((w) => CAP_WORD.test(w)).length;
    if (capCount >= 2) {
      const display = name.join(" ");
      const key = display.toLowerCase();
      if (!seen.has(key)) {
        seen.add(key);
        names.push(display);
      }
    }
    i = j;
  }
  return names;
}

export interface FileMetadata {
  synopsis?: unknown;
  [key: string]: unknown;
}

/**
 * Labels for a set of files: metadata may omit files or the synopsis
 * field entirely; both yield an empty name list.
 */
export function extractLabels(
  fileIds: Iterable<string>,
  metadata: Record<string, FileMetadata>,
): Record<string, string[]> {
  const labels: Record<string, string[]> = {};
  for (const fileId of fileIds) {
    const entry = metadata[fileId];
    const synopsis = entry !== undefined && typeof entry.synopsis === "string" ? entry.synopsis : "";
    labels[fileId] = extractPersonNames(synopsis);
  }
  return labels;
}
