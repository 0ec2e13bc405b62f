// @vitest-environment jsdom
import { describe, expect, it } from "vitest";

import type { Prediction } from "../src/api.js";
import { searchRegions } from "../src/bodymap.js";
import { argmaxClass, renderPrediction } from "../src/view.js";

const prediction: Prediction = {
  predicted_class: "V",
  // deliberately unnormalized tail so we can check nothing is rescaled
  probabilities: { BG: 0.02, N: 0.03, D: 0.15, P: 0.1, S: 0.1, V: 0.6 },
  model_id: "m",
  location: { code: 135, name: "Right Fifth Toe Tip" },
};

describe("argmaxClass", () => {
  it("picks the largest probability", () => {
    expect(argmaxClass({ D: 0.2, V: 0.8 })).toBe("V");
  });

  it("keeps the first class on exact ties", () => {
    expect(argmaxClass({ D: 0.5, V: 0.5 })).toBe("D");
  });
});

describe("renderPrediction", () => {
  it("highlights exactly the argmax bar", () => {
    const card = renderPrediction(document, prediction);
    const highlighted = card.querySelectorAll("li.argmax");
    expect(highlighted).toHaveLength(1);
    expect((highlighted[0] as HTMLElement).dataset.class).toBe("V");
  });

  it("shows every class with its exact reported percentage", () => {
    const card = renderPrediction(document, prediction);
    const bars = [...card.querySelectorAll("li")];
    expect(bars).toHaveLength(6);
    const byClass = new Map(bars.map((b) => [b.dataset.class, b]));
    expect(byClass.get("V")!.querySelector(".bar-value")!.textContent).toBe("60.0%");
    expect(byClass.get("D")!.querySelector(".bar-value")!.textContent).toBe("15.0%");
    expect(byClass.get("BG")!.querySelector(".bar-value")!.textContent).toBe("2.0%");
    const widths = bars.map((b) => parseFloat((b.querySelector(".bar-fill") as HTMLElement).style.width));
    expect(widths[0]).toBe(60); // sorted descending, argmax first
    expect(widths).toEqual([...widths].sort((a, b) => b - a));
  });

  it("names the resolved body-map location", () => {
    const card = renderPrediction(document, prediction);
    expect(card.querySelector(".result-location")!.textContent).toContain("Right Fifth Toe Tip");
  });
});

describe("searchRegions", () => {
  const regions = [
    { code: 135, name: "Right Fifth Toe Tip", side: "right", view: "front" },
    { code: 150, name: "Right Lateral Heel", side: "right", view: "back" },
    { code: 202, name: "Left Fifth Toe Tip", side: "left", view: "front" },
  ];

  it("matches by name fragment, case-insensitively", () => {
    const hits = searchRegions(regions, "toe tip");
    expect(hits.map((r) => r.code)).toEqual([135, 202]);
  });

  it("matches an exact code", () => {
    expect(searchRegions(regions, "150").map((r) => r.code)).toEqual([150]);
  });

  it("returns nothing for a blank query", () => {
    expect(searchRegions(regions, "  ")).toEqual([]);
  });
});
