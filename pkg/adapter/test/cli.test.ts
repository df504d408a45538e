import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, afterEach, beforeAll, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";
import { tone, wavBuffer } from "./helpers.js";

describe("cli main", () => {
  let workDir: string;
  let stdout: string;
  let stderr: string;

  beforeAll(() => {
    workDir = mkdtempSync(path.join(tmpdir(), "adapter-cli-"));
  });

  afterAll(() => {
    rmSync(workDir, { recursive: true, force: true });
  });

  function capture(): void {
    stdout = "";
    stderr = "";
    vi.spyOn(process.stdout, "write").mockImplementation((chunk) => {
      stdout += String(chunk);
      return true;
    });
    vi.spyOn(process.stderr, "write").mockImplementation((chunk) => {
      stderr += String(chunk);
      return true;
    });
  }

  afterEach(() => {
    vi.restoreAllMocks();
  });

  it("prints usage with --help", async () => {
    capture();
    expect(await main(["--help"])).toBe(0);
    expect(stdout).toContain("usage: extraction-adapter");
  });

  it("requires --out and media paths", async () => {
    capture();
    expect(await main([])).toBe(2);
    expect(stderr).toContain("--out");
  });

  it("rejects unknown flags", async () => {
    capture();
    expect(await main(["--bogus"])).toBe(2);
    expect(stderr).not.toBe("");
  });

  it("runs a job from flags and prints the summary", async () => {
    const media = path.join(workDir, "clip.wav");
    writeFileSync(media, wavBuffer([tone(800, 1.0)], 16000));
    const outDir = path.join(workDir, "out");
    capture();
    expect(await main(["--out", outDir, media])).toBe(0);
    const summary = JSON.parse(stdout);
    expect(summary.files_processed).toBe(1);
    expect(summary.segments).toBe(1);
    expect(readFileSync(path.join(outDir, "diarisation.rttm"), "utf8")).toContain("SPEAKER clip 1 ");
  });

  it("runs a job from a --job file and reports job errors", async () => {
    const jobPath = path.join(workDir, "job.json");
    writeFileSync(
      jobPath,
      JSON.stringify({ media: [path.join(workDir, "clip.wav")], outDir: path.join(workDir, "out2"), modelId: "nope" }),
    );
    capture();
    expect(await main(["--job", jobPath])).toBe(1);
    expect(stderr).toContain("unknown embedding model");
  });
});
