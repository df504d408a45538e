import { describe, expect, it } from "vitest";

import { diarize } from "../src/diarize.js";
import { concat, silence, tone } from "./helpers.js";

describe("diarize", () => {
  it("finds one segment and one speaker in a continuous tone", () => {
    const { segments } = diarize(tone(500, 2.0), 16000);
    expect(segments.length).toBe(1);
    expect(segments[0]!.speaker).toBe("spk00");
    expect(segments[0]!.onsetS).toBeLessThan(0.05);
    expect(segments[0]!.durationS).toBeGreaterThan(1.8);
  });

  it("emits nothing for silence", () => {
    const { segments } = diarize(silence(2.0), 16000);
    expect(segments).toEqual([]);
  });

  it("reuses the speaker label when the same voice returns", () => {
    const x = concat(tone(500, 1.0), silence(1.0), tone(500, 1.0));
    const { segments } = diarize(x, 16000);
    expect(segments.length).toBe(2);
    expect(segments[0]!.speaker).toBe("spk00");
    expect(segments[1]!.speaker).toBe("spk00");
  });

  it("assigns distinct labels to spectrally distinct turns", () => {
    const x = concat(tone(300, 1.0), silence(1.0), tone(2400, 1.0));
    const { segments } = diarize(x, 16000);
    expect(segments.length).toBe(2);
    expect(segments[0]!.speaker).toBe("spk00");
    expect(segments[1]!.speaker).toBe("spk01");
  });

  it("bridges pauses shorter than 0.2 s", () => {
    const x = concat(tone(500, 0.8), silence(0.1), tone(500, 0.8));
    const { segments } = diarize(x, 16000);
    expect(segments.length).toBe(1);
  });

  it("drops blips shorter than 0.3 s", () => {
    const x = concat(silence(0.5), tone(500, 0.1), silence(0.5));
    const { segments } = diarize(x, 16000);
    expect(segments).toEqual([]);
  });

  it("keeps onsets sorted and durations positive", () => {
    const x = concat(tone(300, 0.7), silence(0.6), tone(900, 0.5), silence(0.4), tone(1800, 0.9));
    const { segments } = diarize(x, 16000);
    expect(segments.length).toBe(3);
    for (let i = 0; i < segments.length; i++) {
      expect(segments[i]!.durationS).toBeGreaterThan(0);
      if (i > 0) {
        expect(segments[i]!.onsetS).toBeGreaterThan(segments[i - 1]!.onsetS);
      }
    }
  });

  it("is deterministic across calls", () => {
    const x = concat(tone(350, 0.9), silence(0.5), tone(1100, 0.7));
    const a = diarize(x, 16000).segments;
    const b = diarize(x, 16000).segments;
    expect(b).toEqual(a);
  });
});
