#!/usr/bin/env node
/**
 * extraction-adapter --out DIR [--model ID] [--metadata PATH]
 *                    [--workers N] MEDIA...
 *
 * or: extraction-adapter --job JOB.json   (same keys as the flags)
 */

import { readFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { AdapterJob, JobError, runJob } from "./job.js";

export async function main(argv: string[]): Promise<number> {
  let parsed: ReturnType<typeof parseArgs>;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        job: { type: "string" },
        out: { type: "string" },
        model: { type: "string" },
        metadata: { type: "string" },
        workers: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    });
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n`);
    return 2;
  }
  const { values, positionals } = parsed;

  if (values.help) {
    process.stdout.write(
      "usage: extraction-adapter --out DIR [--model ID] [--metadata PATH] [--workers N] MEDIA...\n" +
        "       extraction-adapter --job JOB.json\n",
    );
    return 0;
  }

  let job: AdapterJob;
  if (typeof values.job === "string") {
    job = JSON.parse(readFileSync(values.job, "utf8")) as AdapterJob;
  } else {
    if (typeof values.out !== "string" || positionals.length === 0) {
      process.stderr.write("error: --out and at least one media path are required (or use --job)\n");
      return 2;
    }
    job = {
      media: positionals as string[],
      outDir: values.out,
      modelId: typeof values.model === "string" ? values.model : undefined,
      metadata: typeof values.metadata === "string" ? values.metadata : undefined,
      workers: typeof values.workers === "string" ? Number(values.workers) : undefined,
    };
  }

  try {
    const summary = await runJob(job);
    process.stdout.write(JSON.stringify(summary, null, 2) + "\n");
    return 0;
  } catch (err) {
    if (err instanceof JobError) {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
}

const isDirectRun = process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (isDirectRun) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
