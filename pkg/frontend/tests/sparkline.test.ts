import { describe, expect, it } from "vitest";

import { pushBounded, sparklinePath } from "../src/sparkline.js";

describe("pushBounded", () => {
  it("appends and trims to capacity", () => {
    let series: number[] = [];
    for (let i = 0; i < 70; i++) series = pushBounded(series, i, 60);
    expect(series.length).toBe(60);
    expect(series[0]).toBe(10);
    expect(series[59]).toBe(69);
  });
});

describe("sparklinePath", () => {
  it("is empty for no data", () => {
    expect(sparklinePath([])).toBe("");
  });

  it("scales the peak to the top of the box", () => {
    const path = sparklinePath([0, 0.5, 1.0], 100, 20);
    const points = path.split(" ");
    expect(points[0]).toBe("M0.00,20.00"); // zero sits on the baseline
    expect(points[2]).toBe("L100.00,0.00"); // max touches the top
  });

  it("renders a flat nonzero series as a flat line", () => {
    const path = sparklinePath([0.4, 0.4, 0.4], 100, 20);
    const ys = path.split(" ").map((p) => p.split(",")[1]);
    expect(new Set(ys).size).toBe(1);
  });
});
