/**
 * Challenge flow controller: drives the user journey through the gate's
 * session endpoints and exposes a render-agnostic snapshot of what the
 * current screen should show.
 *
 * The controller never moves ahead of the server: every screen change
 * follows a successful response, and `resume` rebuilds the correct screen
 * purely from GET /v1/sessions/{id} so a page refresh lands where the
 * session actually is. The access token lives only in this object's memory.
 */

import { GateApi, GateApiError, SessionView, SearchResult } from './api.js';
import { looksLikeAddress, rawToXno } from './format.js';

export type Screen =
  | 'enter_wallet'
  | 'ownership'
  | 'payment'
  | 'unlocked'
  | 'expired'
  | 'token_expired';

export interface FlowState {
  screen: Screen;
  sessionId: string | null;
  challengeRepresentative: string | null;
  depositAccount: string | null;
  amountRaw: string | null;
  amountXno: string | null;
  paymentUri: string | null;
  expiresAt: number | null;
  /** guidance for the current screen; cleared on every successful advance */
  notice: string | null;
  observedRepresentative: string | null;
  searchResult: SearchResult | null;
  busy: boolean;
}

const INITIAL: FlowState = {
  screen: 'enter_wallet',
  sessionId: null,
  challengeRepresentative: null,
  depositAccount: null,
  amountRaw: null,
  amountXno: null,
  paymentUri: null,
  expiresAt: null,
  notice: null,
  observedRepresentative: null,
  searchResult: null,
  busy: false,
};

export class ChallengeFlow {
  private state: FlowState = { ...INITIAL };
  private token: string | null = null;
  private sequence = 0;

  constructor(
    private readonly api: GateApi,
    private readonly onChange: (state: FlowState) => void = () => {},
  ) {}

  getState(): FlowState {
    return { ...this.state };
  }

  hasToken(): boolean {
    return this.token !== null;
  }

  private emit(patch: Partial<FlowState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.getState());
  }

  /** Runs one request at a time; responses superseded by a newer trigger are dropped. */
  private async track<T>(work: Promise<T>): Promise<T | null> {
    const seq = ++this.sequence;
    this.emit({ busy: true });
    try {
      const result = await work;
      if (seq !== this.sequence) return null;
      return result;
    } finally {
      if (seq === this.sequence) this.emit({ busy: false });
    }
  }

  private applyPaymentSpec(view: SessionView): void {
    this.emit({
      screen: 'payment',
      notice: null,
      depositAccount: view.deposit_account ?? null,
      amountRaw: view.amount_raw ?? null,
      amountXno: view.amount_raw ? rawToXno(view.amount_raw) : null,
      paymentUri: view.payment_uri ?? null,
      expiresAt: view.expires_at,
    });
  }

  async enterWallet(address: string): Promise<void> {
    const trimmed = address.trim();
    if (!looksLikeAddress(trimmed)) {
      this.emit({ notice: 'That does not look like a nano_… address (60 characters after the prefix).' });
      return;
    }
    try {
      const created = await this.track(this.api.createSession(trimmed));
      if (created === null) return;
      this.emit({
        screen: 'ownership',
        sessionId: created.session_id,
        challengeRepresentative: created.challenge_representative,
        expiresAt: created.expires_at,
        notice: null,
      });
    } catch (error) {
      this.handleGateError(error, {
        invalid_address: (body) => `The gate rejected this address: ${body.reason ?? 'invalid'}.`,
        account_not_found: () => 'This account has no transactions yet. The wallet must be opened (have at least one block) first.',
        too_many_open_sessions: () => 'Too many open sessions for this wallet. Finish or let one expire, then retry.',
        node_unavailable: () => 'The gate cannot reach its Nano node right now. Try again shortly.',
      });
    }
  }

  async checkOwnership(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const view = await this.track(this.api.verifyOwnership(this.state.sessionId));
      if (view === null) return;
      this.applyPaymentSpec(view);
    } catch (error) {
      this.handleGateError(error, {
        representative_mismatch: (body) => `The node still reports representative ${body.observed}. Wallet changes can take a moment to propagate; check you pasted the exact address, then try again.`,
        session_expired: () => this.expire(),
      });
    }
  }

  async checkPayment(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const grant = await this.track(this.api.verifyPayment(this.state.sessionId));
      if (grant === null) return;
      this.token = grant.access_token;
      this.emit({
        screen: 'unlocked',
        notice: 'Access granted. You can now restore your original representative in your wallet; the gate no longer checks it.',
      });
    } catch (error) {
      this.handleGateError(error, {
        payment_not_found: () => 'No qualifying payment found yet. Send the exact amount to the deposit account from THIS wallet, after starting the session, then verify again.',
        underpaid: (body) => {
          const shortfall = this.state.amountRaw && body.best_amount
            ? (BigInt(this.state.amountRaw) - BigInt(body.best_amount)).toString()
            : null;
          return shortfall
            ? `Your best payment is ${body.best_amount} raw, ${shortfall} raw short. Send a single payment of the full amount.`
            : 'The payment found is below the required amount.';
        },
        unconfirmed_payment: () => 'Your payment is on the ledger but not yet confirmed by the network. Wait a moment and verify again.',
        session_expired: () => this.expire(),
      });
    }
  }

  async search(query: string): Promise<void> {
    if (query.trim() === '') {
      this.emit({ notice: 'Enter a query first.' });
      return;
    }
    if (this.token === null) {
      this.emit({ screen: 'token_expired', notice: null });
      return;
    }
    try {
      const result = await this.track(this.api.search(this.token, query));
      if (result === null) return;
      this.emit({ searchResult: result, notice: null });
    } catch (error) {
      if (error instanceof GateApiError && error.status === 401) {
        this.token = null;
        this.emit({ screen: 'token_expired', notice: null });
        return;
      }
      throw error;
    }
  }

  /** Rebuild the screen from the server's view of the session (page refresh). */
  async resume(sessionId: string): Promise<void> {
    try {
      const view = await this.track(this.api.getSession(sessionId));
      if (view === null) return;
      this.emit({ sessionId: view.session_id, challengeRepresentative: view.challenge_representative });
      switch (view.state) {
        case 'awaiting_ownership':
          this.emit({ screen: 'ownership', expiresAt: view.expires_at, notice: null });
          break;
        case 'awaiting_payment':
          this.applyPaymentSpec(view);
          break;
        case 'granted':
          // The token was handed out exactly once and is gone after a refresh.
          this.emit({ screen: 'token_expired', notice: null });
          break;
        default:
          this.expire();
      }
    } catch (error) {
      if (error instanceof GateApiError && error.status === 404) {
        this.restart();
        return;
      }
      throw error;
    }
  }

  restart(): void {
    this.token = null;
    this.sequence++;
    this.state = { ...INITIAL };
    this.onChange(this.getState());
  }

  private expire(): string {
    this.emit({ screen: 'expired', notice: null });
    return '';
  }

  private handleGateError(
    error: unknown,
    messages: Record<string, (body: { error: string; reason?: string; observed?: string; best_amount?: string }) => string | void>,
  ): void {
    if (!(error instanceof GateApiError)) throw error;
    if (error.status === 410) {
      this.expire();
      return;
    }
    const toMessage = messages[error.body.error];
    if (toMessage === undefined) {
      this.emit({ notice: `Unexpected gate response: ${error.body.error}` });
      return;
    }
    const observed = error.body.error === 'representative_mismatch' ? error.body.observed ?? null : null;
    const message = toMessage(error.body);
    if (typeof message === 'string') {
      this.emit({ notice: message, observedRepresentative: observed });
    }
  }
}
