#!/usr/bin/env node
// Stand-in for `z3 -in`: reads SMT-LIB2 commands from stdin, evaluates them
// with the z3 WASM build and writes replies to stdout. Commands are fed to
// z3 one complete s-expression at a time so that interactive clients can
// sync on the output of each command.

'use strict';

const path = require('path');
const { init } = require(path.join(__dirname, 'node_modules', 'z3-solver'));

// Splits a buffer into complete top-level s-expressions. Returns
// [expressions, rest]. Handles "..." and |...| quoting and ; comments.
function splitCommands(buf) {
  const out = [];
  let depth = 0, start = 0, i = 0;
  let inStr = false, inQuote = false, inComment = false;
  for (; i < buf.length; i++) {
    const c = buf[i];
    if (inComment) { if (c === '\n') inComment = false; continue; }
    if (inStr) { if (c === '"') inStr = false; continue; }
    if (inQuote) { if (c === '|') inQuote = false; continue; }
    if (c === ';') { inComment = true; continue; }
    if (c === '"') { inStr = true; continue; }
    if (c === '|') { inQuote = true; continue; }
    if (c === '(') { if (depth === 0) start = i; depth++; }
    else if (c === ')') {
      depth--;
      if (depth === 0) { out.push(buf.slice(start, i + 1)); start = i + 1; }
    }
  }
  return [out, depth === 0 ? buf.slice(start) : buf.slice(start)];
}

async function main() {
  const { Z3, em } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  let pending = '';
  let queue = Promise.resolve();

  // The stock Z3.eval_smtlib2_string marshals the command via ccall's
  // 'string' mode, which stack-allocates it and frees it on return -- but the
  // async export only queues the work for a solver thread, which then reads
  // the freed stack slot and sees nondeterministically truncated input. Copy
  // the command into the heap ourselves and keep it alive until z3 answers.
  const enc = new TextEncoder();
  async function evalSmt2(cmd) {
    const bytes = enc.encode(cmd);
    const ptr = em._malloc(bytes.length + 1);
    em.HEAPU8.set(bytes, ptr);
    em.HEAPU8[ptr + bytes.length] = 0;
    try {
      return await em.async_call(() =>
        em.ccall('async_Z3_eval_smtlib2_string', 'void', ['number', 'number'], [ctx, ptr]));
    } finally {
      em._free(ptr);
    }
  }

  process.stdin.setEncoding('utf8');
  process.stdin.on('data', chunk => {
    pending += chunk;
    const [cmds, rest] = splitCommands(pending);
    pending = rest;
    for (const cmd of cmds) {
      queue = queue.then(async () => {
        if (/^\(\s*exit\s*\)$/.test(cmd)) process.exit(0);
        let res;
        try {
          res = await evalSmt2(cmd);
        } catch (e) {
          res = '(error "' + String(e).replace(/"/g, "'") + '")';
        }
        if (res && res.trim() !== '') process.stdout.write(res.trim() + '\n');
      });
    }
  });
  process.stdin.on('end', () => { queue.then(() => process.exit(0)); });
}

main();
