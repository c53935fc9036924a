#!/usr/bin/env node
// CLI wrapper: branchwalk-report --in <csv_dir> --out <dir>
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { render } from './render';

const args = yargs(hideBin(process.argv))
  .usage('$0 --in [dir] --out [dir]')
  .string('in')
  .describe('in', 'Directory holding branchwalk CSV artifacts')
  .demandOption('in')
  .string('out')
  .describe('out', 'Output directory for SVG figures and summary.txt')
  .demandOption('out')
  .strict()
  .help('help')
  .parseSync();

try {
  const files = render(args.in as string, args.out as string);
  for (const f of files) {
    console.log(f);
  }
} catch (err) {
  console.error(`report: ${err instanceof Error ? err.message : String(err)}`);
  process.exit(1);
}
