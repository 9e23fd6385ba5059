/** DOM wiring for the challenge page. Business logic lives in flow.ts. */

import qrcode from 'qrcode-generator';
import { GateApi } from './api.js';
import { ChallengeFlow, FlowState } from './flow.js';

const GATE_BASE_URL = (window as any).GATE_BASE_URL ?? '';
const POLL_INTERVAL_MS = 3000;

function el(tag: string, attrs: Record<string, string> = {}, text = ''): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function copyButton(value: string): HTMLElement {
  const button = el('button', { class: 'copy' }, 'copy');
  button.addEventListener('click', () => navigator.clipboard.writeText(value));
  return button;
}

function qrSvg(text: string): HTMLElement {
  const qr = qrcode(0, 'M');
  qr.addData(text);
  qr.make();
  const holder = el('div', { class: 'qr' });
  holder.innerHTML = qr.createSvgTag({ cellSize: 4, margin: 2 });
  return holder;
}

export function mount(root: HTMLElement): ChallengeFlow {
  const api = new GateApi(GATE_BASE_URL);
  let pollTimer: ReturnType<typeof setInterval> | null = null;
  let autoPoll = false;

  const flow = new ChallengeFlow(api, render);

  function setPolling(state: FlowState): void {
    const shouldPoll = autoPoll && (state.screen === 'ownership' || state.screen === 'payment');
    if (shouldPoll && pollTimer === null) {
      pollTimer = setInterval(() => {
        const current = flow.getState();
        if (current.busy) return;
        if (current.screen === 'ownership') void flow.checkOwnership();
        else if (current.screen === 'payment') void flow.checkPayment();
      }, POLL_INTERVAL_MS);
    } else if (!shouldPoll && pollTimer !== null) {
      clearInterval(pollTimer);
      pollTimer = null;
    }
  }

  function render(state: FlowState): void {
    if (state.sessionId) window.location.hash = state.sessionId;
    else if (window.location.hash) history.replaceState(null, '', ' ');
    setPolling(state);
    root.replaceChildren();
    root.appendChild(el('h1', {}, 'Pay-per-access challenge'));

    if (state.notice) root.appendChild(el('p', { class: 'notice' }, state.notice));

    switch (state.screen) {
      case 'enter_wallet': {
        root.appendChild(el('p', {}, 'Step 1 of 4: enter the Nano wallet address you will pay from.'));
        const input = el('input', { id: 'wallet', placeholder: 'nano_…' }) as HTMLInputElement;
        const go = el('button', { id: 'connect' }, 'Connect wallet');
        go.addEventListener('click', () => void flow.enterWallet(input.value));
        root.append(input, go);
        break;
      }
      case 'ownership': {
        root.appendChild(el('p', {}, 'Step 2 of 4: prove you control this wallet. In your wallet app, change the account representative to exactly:'));
        const rep = state.challengeRepresentative ?? '';
        const code = el('code', { id: 'challenge-rep' }, rep);
        root.append(code, copyButton(rep));
        const check = el('button', { id: 'check-ownership' }, 'I changed it');
        check.addEventListener('click', () => void flow.checkOwnership());
        root.appendChild(check);
        if (state.observedRepresentative) {
          root.appendChild(el('p', { class: 'observed' },
            `Node currently reports: ${state.observedRepresentative}`));
        }
        root.appendChild(pollToggle());
        break;
      }
      case 'payment': {
        root.appendChild(el('p', {}, `Step 3 of 4: pay ${state.amountXno} XNO (${state.amountRaw} raw) to:`));
        const deposit = state.depositAccount ?? '';
        root.append(el('code', { id: 'deposit-account' }, deposit), copyButton(deposit));
        const uri = state.paymentUri ?? '';
        root.append(el('p', {}, 'Payment link:'), el('code', { id: 'payment-uri' }, uri), copyButton(uri));
        root.appendChild(qrSvg(uri));
        const check = el('button', { id: 'check-payment' }, 'I paid');
        check.addEventListener('click', () => void flow.checkPayment());
        root.appendChild(check);
        root.appendChild(pollToggle());
        break;
      }
      case 'unlocked': {
        root.appendChild(el('p', {}, 'Step 4 of 4: access granted. Remember to restore your original representative in your wallet.'));
        const input = el('input', { id: 'query', placeholder: 'search…' }) as HTMLInputElement;
        const go = el('button', { id: 'search' }, 'Search');
        go.addEventListener('click', () => void flow.search(input.value));
        root.append(input, go);
        if (state.searchResult) {
          root.appendChild(el('pre', { id: 'search-result' },
            JSON.stringify(state.searchResult.result, null, 2)));
        }
        break;
      }
      case 'expired': {
        root.appendChild(el('p', {}, 'This session expired before it was completed.'));
        root.appendChild(restartButton());
        break;
      }
      case 'token_expired': {
        root.appendChild(el('p', {}, 'Your access token is no longer valid. Each token is issued exactly once per paid session; start a new session to continue.'));
        root.appendChild(restartButton());
        break;
      }
    }
  }

  function restartButton(): HTMLElement {
    const button = el('button', { id: 'restart' }, 'Start over');
    button.addEventListener('click', () => flow.restart());
    return button;
  }

  function pollToggle(): HTMLElement {
    const label = el('label', { class: 'poll-toggle' });
    const box = el('input', { type: 'checkbox' }) as HTMLInputElement;
    box.checked = autoPoll;
    box.addEventListener('change', () => {
      autoPoll = box.checked;
      setPolling(flow.getState());
    });
    label.append(box, document.createTextNode(' auto-check every 3 s'));
    return label;
  }

  const resumeId = window.location.hash.slice(1);
  if (resumeId) void flow.resume(resumeId);
  else render(flow.getState());
  return flow;
}

if (typeof document !== 'undefined') {
  const root = document.getElementById('app');
  if (root) mount(root);
}
