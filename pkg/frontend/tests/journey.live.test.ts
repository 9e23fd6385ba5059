/**
 * Full UI journey against a real gate and mock node, spawned as child
 * processes: enter address -> change representative via the wallet-sim
 * admin RPC -> verify -> pay -> verify -> search, plus a mid-flow
 * "page refresh" that resumes on the correct screen.
 *
 * Requires the Python package to be installed (`pip install -e ..`);
 * skipped automatically when python3 is unavailable.
 */

import { spawn, spawnSync, ChildProcess } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { GateApi } from '../src/api.js';
import { ChallengeFlow } from '../src/flow.js';
import { DEPOSIT, PAYER } from './fakeGate.js';

const PYTHON = 'python3';
const NODE_PORT = 17276;
const GATE_PORT = 17286;
const NODE_URL = `http://127.0.0.1:${NODE_PORT}`;
const GATE_URL = `http://127.0.0.1:${GATE_PORT}`;
const PRICE_RAW = '1000';

const pythonAvailable = spawnSync(PYTHON, ['-c', 'import nanogate']).status === 0;
const children: ChildProcess[] = [];

function start(args: string[], env: Record<string, string> = {}): ChildProcess {
  const child = spawn(PYTHON, ['-m', 'nanogate.cli', ...args], {
    env: { ...process.env, ...env },
    stdio: 'ignore',
  });
  children.push(child);
  return child;
}

async function waitFor(url: string, init?: RequestInit): Promise<void> {
  const deadline = Date.now() + 15_000;
  for (;;) {
    try {
      await fetch(url, init);
      return;
    } catch {
      if (Date.now() > deadline) throw new Error(`timed out waiting for ${url}`);
      await new Promise((resolve) => setTimeout(resolve, 150));
    }
  }
}

async function nodeRpc(payload: Record<string, string>): Promise<Record<string, string>> {
  const response = await fetch(NODE_URL, { method: 'POST', body: JSON.stringify(payload) });
  const body = await response.json();
  if (body.error) throw new Error(`node rpc: ${body.error}`);
  return body;
}

describe.skipIf(!pythonAvailable)('live UI journey', () => {
  beforeAll(async () => {
    start(['mock-node', '--listen', `127.0.0.1:${NODE_PORT}`]);
    await waitFor(NODE_URL, { method: 'POST', body: '{"action":"x"}' });
    start(['serve'], {
      GATE_LISTEN_ADDR: `127.0.0.1:${GATE_PORT}`,
      GATE_NODE_URL: NODE_URL,
      GATE_DEPOSIT_ACCOUNT: DEPOSIT,
      GATE_PRICE_RAW: PRICE_RAW,
      GATE_TOKEN_SECRET: 'x'.repeat(32),
    });
    await waitFor(`${GATE_URL}/healthz`);
  }, 30_000);

  afterAll(() => {
    for (const child of children) child.kill('SIGINT');
  });

  it('completes the whole human flow with a mid-flow refresh', async () => {
    await nodeRpc({ action: 'sim_mint', account: PAYER, amount: '1000000' });

    let flow = new ChallengeFlow(new GateApi(GATE_URL));
    await flow.enterWallet(PAYER);
    expect(flow.getState().screen).toBe('ownership');
    const sessionId = flow.getState().sessionId!;
    const challengeRep = flow.getState().challengeRepresentative!;

    // trying before the wallet action stays on the ownership screen
    await flow.checkOwnership();
    expect(flow.getState().screen).toBe('ownership');
    expect(flow.getState().observedRepresentative).toBe(PAYER);

    await nodeRpc({ action: 'sim_change_representative', account: PAYER, representative: challengeRep });
    await flow.checkOwnership();
    expect(flow.getState().screen).toBe('payment');
    expect(flow.getState().amountRaw).toBe(PRICE_RAW);
    expect(flow.getState().paymentUri).toBe(`nano:${DEPOSIT}?amount=${PRICE_RAW}`);

    // page refresh mid-flow: a fresh controller resumes on the payment screen
    flow = new ChallengeFlow(new GateApi(GATE_URL));
    await flow.resume(sessionId);
    expect(flow.getState().screen).toBe('payment');
    expect(flow.getState().paymentUri).toBe(`nano:${DEPOSIT}?amount=${PRICE_RAW}`);

    await flow.checkPayment();
    expect(flow.getState().screen).toBe('payment'); // not paid yet

    await nodeRpc({ action: 'sim_send', from: PAYER, to: DEPOSIT, amount: PRICE_RAW });
    await flow.checkPayment();
    expect(flow.getState().screen).toBe('unlocked');

    await flow.search('pay per search demo');
    expect(flow.getState().searchResult?.result.word_count).toBe(4);
  }, 30_000);
});
