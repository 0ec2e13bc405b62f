// Clickable lower-leg body map. The wound corpus concentrates on feet and
// ankles, so the schematic pins hit areas for the named foot/ankle regions;
// every other registry code is reachable through the search list.

import type { BodyMapRegion } from "./api.js";

export interface HitArea {
  code: number;
  cx: number;
  cy: number;
  view: "front" | "back";
}

// Front view uses the clinical convention: the patient's right side sits on
// the viewer's left. Coordinates are in the 320x180 viewBox below.
export const HIT_AREAS: HitArea[] = [
  { code: 135, cx: 36, cy: 150, view: "front" }, // Right Fifth Toe Tip
  { code: 158, cx: 96, cy: 84, view: "front" }, // Right Medial Malleolus
  { code: 159, cx: 52, cy: 112, view: "front" }, // Right Proximal Lateral Dorsal Foot
  { code: 178, cx: 224, cy: 84, view: "front" }, // Left Medial Malleolus
  { code: 180, cx: 250, cy: 70, view: "front" }, // Left Anterior Ankle
  { code: 202, cx: 284, cy: 150, view: "front" }, // Left Fifth Toe Tip
  { code: 150, cx: 110, cy: 150, view: "back" }, // Right Lateral Heel
  { code: 215, cx: 232, cy: 140, view: "back" }, // Left Proximal Medial Plantar Foot
];

const FOOT_FRONT_RIGHT =
  "M60,20 C52,60 48,86 40,110 C30,130 26,142 30,156 C40,168 70,168 84,158 " +
  "C92,146 92,120 88,96 C84,70 82,44 80,20 Z";
const FOOT_FRONT_LEFT =
  "M260,20 C268,60 272,86 280,110 C290,130 294,142 290,156 C280,168 250,168 236,158 " +
  "C228,146 228,120 232,96 C236,70 238,44 240,20 Z";
const FOOT_BACK_RIGHT =
  "M70,20 C66,60 64,90 64,116 C62,140 68,158 84,162 C100,158 106,140 104,116 " +
  "C104,90 100,60 96,20 Z";
const FOOT_BACK_LEFT =
  "M250,20 C254,60 256,90 256,116 C258,140 252,158 236,162 C220,158 214,140 216,116 " +
  "C216,90 220,60 224,20 Z";

/**
 * Render one view panel into an SVG element with a circle per hit area.
 * Clicking a circle reports the region code through onPick.
 */
export function renderPanel(
  doc: Document,
  view: "front" | "back",
  regions: Map<number, BodyMapRegion>,
  selected: number | null,
  onPick: (code: number) => void,
): SVGSVGElement {
  const ns = "http://www.w3.org/2000/svg";
  const svg = doc.createElementNS(ns, "svg");
  svg.setAttribute("viewBox", "0 0 320 180");
  svg.setAttribute("class", `bodymap-panel bodymap-${view}`);
  svg.setAttribute("role", "group");
  svg.setAttribute("aria-label", `${view} view`);

  const outlines = view === "front" ? [FOOT_FRONT_RIGHT, FOOT_FRONT_LEFT] : [FOOT_BACK_RIGHT, FOOT_BACK_LEFT];
  for (const d of outlines) {
    const path = doc.createElementNS(ns, "path");
    path.setAttribute("d", d);
    path.setAttribute("class", "bodymap-outline");
    svg.appendChild(path);
  }

  for (const area of HIT_AREAS) {
    if (area.view !== view) continue;
    const region = regions.get(area.code);
    if (!region) continue;
    const circle = doc.createElementNS(ns, "circle");
    circle.setAttribute("cx", String(area.cx));
    circle.setAttribute("cy", String(area.cy));
    circle.setAttribute("r", "11");
    circle.setAttribute("data-code", String(area.code));
    circle.setAttribute("class", area.code === selected ? "bodymap-hit selected" : "bodymap-hit");
    circle.setAttribute("role", "button");
    circle.setAttribute("aria-label", region.name);
    const title = doc.createElementNS(ns, "title");
    title.textContent = `${region.name} (${area.code})`;
    circle.appendChild(title);
    circle.addEventListener("click", () => onPick(area.code));
    svg.appendChild(circle);
  }
  return svg;
}

/** Case-insensitive substring search over region names and codes. */
export function searchRegions(regions: BodyMapRegion[], query: string, limit = 12): BodyMapRegion[] {
  const needle = query.trim().toLowerCase();
  if (!needle) return [];
  const hits: BodyMapRegion[] = [];
  for (const region of regions) {
    if (region.name.toLowerCase().includes(needle) || String(region.code) === needle) {
      hits.push(region);
      if (hits.length >= limit) break;
    }
  }
  return hits;
}
