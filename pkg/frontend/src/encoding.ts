/**
 * Validation for the visual-encoding text editor. The draft is the JSON
 * params fragment of a VisualEncoding node; applying it must produce a
 * node the engine will accept, so the rules here restate the builder's:
 * known mark, known channel names, channel values either a field-name
 * shorthand or a {field, scale?, legend?} object, view/world coordinates.
 */

export const MARKS = ["point", "bar", "line", "image", "mesh", "volume", "text"];
export const CHANNELS = ["x", "y", "z", "color", "size", "text", "opacity"];

export interface Diagnostic {
  path: string;
  message: string;
}

export interface DraftResult {
  ok: boolean;
  value?: Record<string, unknown>;
  diagnostics: Diagnostic[];
}

export function validateEncodingDraft(text: string): DraftResult {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (e) {
    return {
      ok: false,
      diagnostics: [{ path: "", message: `not valid JSON: ${(e as Error).message}` }],
    };
  }
  const diagnostics: Diagnostic[] = [];
  if (parsed === null || typeof parsed !== "object" || Array.isArray(parsed)) {
    return {
      ok: false,
      diagnostics: [{ path: "", message: "draft must be a JSON object" }],
    };
  }
  const draft = parsed as Record<string, unknown>;

  for (const key of Object.keys(draft)) {
    if (!["mark", "channels", "coordinate_type", "scale"].includes(key)) {
      diagnostics.push({ path: key, message: `unknown key ${key}` });
    }
  }

  const mark = draft.mark;
  if (typeof mark !== "string") {
    diagnostics.push({ path: "mark", message: "mark is required" });
  } else if (!MARKS.includes(mark)) {
    diagnostics.push({
      path: "mark",
      message: `unknown mark ${mark}; one of ${MARKS.join(", ")}`,
    });
  }

  if (draft.channels !== undefined && draft.channels !== null) {
    const channels = draft.channels;
    if (typeof channels !== "object" || Array.isArray(channels)) {
      diagnostics.push({ path: "channels", message: "channels must be an object" });
    } else {
      for (const [name, enc] of Object.entries(channels)) {
        const path = `channels.${name}`;
        if (!CHANNELS.includes(name)) {
          diagnostics.push({
            path,
            message: `unknown channel ${name}; one of ${CHANNELS.join(", ")}`,
          });
        }
        if (typeof enc === "string") continue; // field-name shorthand
        if (enc === null || typeof enc !== "object" || Array.isArray(enc)) {
          diagnostics.push({
            path,
            message: "channel must be a field name or an encoding object",
          });
          continue;
        }
        const obj = enc as Record<string, unknown>;
        if (typeof obj.field !== "string") {
          diagnostics.push({ path: `${path}.field`, message: "field name required" });
        }
        if (obj.scale !== undefined) {
          const scale = obj.scale as Record<string, unknown> | null;
          if (!scale || typeof scale !== "object" || Array.isArray(scale)) {
            diagnostics.push({ path: `${path}.scale`, message: "scale must be an object" });
          } else {
            if (scale.type !== "linear" && scale.type !== "ordinal") {
              diagnostics.push({
                path: `${path}.scale.type`,
                message: "scale type must be linear or ordinal",
              });
            }
            if (!Array.isArray(scale.domain)) {
              diagnostics.push({
                path: `${path}.scale.domain`,
                message: "scale needs a domain array",
              });
            }
          }
        }
      }
    }
  }

  const coord = draft.coordinate_type;
  if (coord !== undefined && coord !== "view" && coord !== "world") {
    diagnostics.push({
      path: "coordinate_type",
      message: "coordinate_type must be view or world",
    });
  }

  if (draft.scale !== undefined) {
    const s = draft.scale;
    if (typeof s !== "number" || !Number.isFinite(s) || s <= 0) {
      diagnostics.push({ path: "scale", message: "scale must be a positive number" });
    }
  }

  return diagnostics.length
    ? { ok: false, diagnostics }
    : { ok: true, value: draft, diagnostics };
}
