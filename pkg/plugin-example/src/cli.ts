/**
 * Reference external denoiser for the denoise-bench directory protocol.
 *
 * Usage: node dist/cli.js --input DIR --output DIR [--mode identity|blur]
 *
 * Reads every PNG in the input directory and writes a same-named PNG to the
 * output directory. Identity mode copies pixels; blur mode applies a 3x3 box
 * filter and quantizes. Exit code 0 on success, 1 with a message on stderr
 * otherwise.
 */
import * as fs from "fs";
import * as path from "path";
import { parseArgs } from "node:util";

import { boxBlur3, quantize } from "./image.js";
import { readGrayPng, writeGrayPng } from "./png.js";

export function main(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        input: { type: "string" },
        output: { type: "string" },
        mode: { type: "string", default: "identity" },
      },
    }));
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    return 1;
  }
  const { input, output, mode } = values;
  if (!input || !output) {
    console.error("usage: cli.js --input DIR --output DIR [--mode identity|blur]");
    return 1;
  }
  if (mode !== "identity" && mode !== "blur") {
    console.error(`unknown mode '${mode}' (expected identity or blur)`);
    return 1;
  }
  let names: string[];
  try {
    names = fs.readdirSync(input).filter((f) => f.toLowerCase().endsWith(".png")).sort();
  } catch (err) {
    console.error(`cannot read input directory: ${(err as Error).message}`);
    return 1;
  }
  if (!fs.existsSync(output) || !fs.statSync(output).isDirectory()) {
    console.error(`output directory does not exist: ${output}`);
    return 1;
  }
  for (const name of names) {
    try {
      const img = readGrayPng(path.join(input, name));
      const result = mode === "blur" ? quantize(boxBlur3(img)) : img;
      writeGrayPng(path.join(output, name), result);
    } catch (err) {
      console.error(`failed on ${name}: ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
