// Console shell: three screens (pending queue, citizens & lifecycle,
// audit browser) over the documented gateway API, refreshed by the alert
// feed. Refresh-safe: every screen re-derives from server state.

import { ConsoleApi, RequestFailed } from './api';
import { AlertFeed } from './sse';
import { renderAudit, summarizeReplay, type AuditViewState } from './views/audit';
import { renderCitizens, type CitizensViewState } from './views/citizens';
import { renderQueue } from './views/queue';
import type { Alert, RiskTier, Session, Ticket } from './types';

export type ScreenName = 'queue' | 'citizens' | 'audit';

export class ConsoleApp {
  api: ConsoleApi;
  session: Session;
  feed: AlertFeed | null = null;
  screen: ScreenName = 'queue';
  tickets: Ticket[] = [];
  feedConnected = false;
  private citizensState: CitizensViewState = {
    citizens: [],
    memories: {},
    destructionTickets: [],
  };
  private auditState: AuditViewState = {
    verify: null,
    events: [],
    replayAt: null,
    replaySummary: null,
  };

  constructor(
    private root: HTMLElement,
    serverUrl: string,
    token: string,
  ) {
    this.session = { serverUrl, token, principal: '', tierCeiling: null };
    this.api = new ConsoleApi(serverUrl, token);
  }

  async start(withFeed = true): Promise<void> {
    const identity = await this.api.whoami();
    this.session.principal = identity.principal;
    this.session.tierCeiling = (identity.tier_ceiling as RiskTier | null) ?? null;
    this.root.innerHTML = this.shell();
    this.bindShell();
    if (withFeed) {
      this.feed = new AlertFeed(this.session.serverUrl, (alert) => this.onAlert(alert));
      this.feed.onStatus = (connected) => {
        this.feedConnected = connected;
        const banner = this.root.querySelector('[data-role="feed-banner"]');
        if (connected && banner) banner.remove();
      };
      this.feed.start();
    }
    await this.show('queue');
  }

  stop(): void {
    this.feed?.stop();
  }

  private shell(): string {
    return `
      <header class="topbar">
        <b>memvault console</b>
        <nav>
          <button data-screen="queue">pending queue</button>
          <button data-screen="citizens">citizens &amp; lifecycle</button>
          <button data-screen="audit">audit browser</button>
        </nav>
        <span class="whoami">${this.session.principal}
          ${this.session.tierCeiling ? `<span class="badge">${this.session.tierCeiling} ceiling</span>` : ''}
        </span>
      </header>
      <main data-role="screen"></main>`;
  }

  private bindShell(): void {
    this.root.querySelectorAll('nav button').forEach((button) => {
      button.addEventListener('click', () => {
        void this.show(button.getAttribute('data-screen') as ScreenName);
      });
    });
  }

  private main(): HTMLElement {
    return this.root.querySelector('[data-role="screen"]') as HTMLElement;
  }

  async show(screen: ScreenName): Promise<void> {
    this.screen = screen;
    if (screen === 'queue') await this.refreshQueue();
    else if (screen === 'citizens') await this.refreshCitizens();
    else await this.refreshAudit();
  }

  // -- alerts ----------------------------------------------------------------

  onAlert(alert: Alert): void {
    this.feedConnected = true;
    if (alert.kind === 'ticket_suspended' && alert.ticket_id) {
      // reflag in place, then refetch for truth; no page reload
      const ticket = this.tickets.find((t) => t.ticket_id === alert.ticket_id);
      if (ticket) ticket.state = 'suspended';
      if (this.screen === 'queue') {
        const row = this.main().querySelector(
          `[data-ticket-id="${alert.ticket_id}"]`,
        );
        if (row) {
          row.classList.add('flagged');
          row.classList.remove('state-pending');
          row.classList.add('state-suspended');
          const label = row.querySelector('[data-role="state"]');
          if (label) label.textContent = 'suspended ⚠ needs a human';
        }
      }
    }
    void this.backgroundRefresh();
  }

  private async backgroundRefresh(): Promise<void> {
    try {
      if (this.screen === 'queue') await this.refreshQueue();
    } catch {
      // next alert or manual navigation retries
    }
  }

  // -- pending queue ------------------------------------------------------------

  async refreshQueue(): Promise<void> {
    this.tickets = await this.api.tickets();
    this.main().innerHTML = renderQueue({
      tickets: this.tickets,
      tierCeiling: this.session.tierCeiling,
      nowIso: new Date().toISOString(),
      feedConnected: this.feedConnected,
    });
    this.main()
      .querySelectorAll('[data-role="decide-form"]')
      .forEach((form) => {
        form.addEventListener('submit', (event) => {
          event.preventDefault();
          const submitter = (event as SubmitEvent).submitter as HTMLButtonElement | null;
          void this.submitDecision(
            form as HTMLFormElement,
            (submitter?.value ?? 'approve') as 'approve' | 'reject',
          );
        });
      });
  }

  async submitDecision(
    form: HTMLFormElement,
    verdict: 'approve' | 'reject',
  ): Promise<void> {
    const ticketId = form.getAttribute('data-ticket-id') ?? '';
    const input = form.querySelector('input[name="rationale"]') as HTMLInputElement;
    const errorSlot = form.querySelector('[data-role="form-error"]') as HTMLElement;
    const rationale = input.value.trim();
    if (!rationale) {
      // client-side block: an empty rationale never reaches the network
      errorSlot.textContent = 'a rationale is required';
      return;
    }
    try {
      await this.api.decide(ticketId, verdict, rationale);
      await this.refreshQueue();
    } catch (error) {
      errorSlot.textContent =
        error instanceof RequestFailed
          ? `${error.status} ${error.body.code}: ${error.body.message}`
          : String(error);
    }
  }

  // -- citizens & lifecycle --------------------------------------------------------

  async refreshCitizens(): Promise<void> {
    const citizens = await this.api.citizens();
    const memories: CitizensViewState['memories'] = {};
    for (const citizen of citizens) {
      memories[citizen.citizen_id] =
        citizen.stage === 'departed' ? [] : await this.api.recall(citizen.citizen_id);
    }
    const tickets = await this.api.tickets();
    this.citizensState = {
      citizens,
      memories,
      destructionTickets: tickets.filter((t) => t.op.op_kind === 'destroy'),
    };
    this.main().innerHTML = renderCitizens(this.citizensState);
    this.main()
      .querySelectorAll('[data-role="propose-destruction"]')
      .forEach((button) => {
        button.addEventListener('click', () => {
          void this.proposeDestruction(button as HTMLButtonElement);
        });
      });
    this.main()
      .querySelectorAll('[data-role="execute-destruction"]')
      .forEach((button) => {
        button.addEventListener('click', () => {
          void this.executeDestruction(button as HTMLButtonElement);
        });
      });
  }

  private consentFor(button: HTMLButtonElement): string | undefined {
    // identity-grade tiers need the citizen's own signed assent; the
    // operator pastes the current instance id as the signature
    const tier = button.getAttribute('data-tier');
    if (tier === 'T0' || tier === 'T1') {
      const row = button.closest('[data-record-id]');
      const answer = (globalThis as { prompt?: (q: string) => string | null }).prompt?.(
        `consent (citizen's current instance id) for ${row?.getAttribute('data-record-id')}`,
      );
      return answer ?? undefined;
    }
    return undefined;
  }

  async proposeDestruction(button: HTMLButtonElement): Promise<void> {
    const recordId = button.getAttribute('data-record-id') ?? '';
    try {
      await this.api.proposeDestruction(recordId, this.consentFor(button));
    } catch (error) {
      this.flashError(error);
    }
    await this.refreshCitizens();
  }

  async executeDestruction(button: HTMLButtonElement): Promise<void> {
    const recordId = button.getAttribute('data-record-id') ?? '';
    const ticketId = button.getAttribute('data-ticket-id') ?? '';
    try {
      await this.api.executeDestruction(recordId, ticketId);
    } catch (error) {
      this.flashError(error);
    }
    await this.refreshCitizens();
  }

  private flashError(error: unknown): void {
    const box = this.root.ownerDocument.createElement('div');
    box.className = 'banner banner-error';
    box.textContent =
      error instanceof RequestFailed
        ? `${error.status} ${error.body.code}: ${error.body.message}`
        : String(error);
    this.main().prepend(box);
  }

  // -- audit browser ---------------------------------------------------------------

  async refreshAudit(): Promise<void> {
    const [verify, events] = await Promise.all([
      this.api.verifyChain(),
      this.api.exportChain(),
    ]);
    this.auditState = { ...this.auditState, verify, events };
    this.main().innerHTML = renderAudit(this.auditState);
    const form = this.main().querySelector('[data-role="replay-form"]');
    form?.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = (form as HTMLFormElement).querySelector(
        'input[name="at"]',
      ) as HTMLInputElement;
      void this.runReplay(input.value.trim());
    });
  }

  async runReplay(at: string): Promise<void> {
    if (!at) return;
    const state = await this.api.replayAt(at);
    this.auditState = {
      ...this.auditState,
      replayAt: at,
      replaySummary: summarizeReplay(state),
    };
    this.main().innerHTML = renderAudit(this.auditState);
    const form = this.main().querySelector('[data-role="replay-form"]');
    form?.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = (form as HTMLFormElement).querySelector(
        'input[name="at"]',
      ) as HTMLInputElement;
      void this.runReplay(input.value.trim());
    });
  }
}

// Browser bootstrap: reads connection settings from the page and mounts.
export function mountFromDocument(doc: Document): ConsoleApp | null {
  const root = doc.getElementById('console-root');
  if (!root) return null;
  const params = new URLSearchParams(doc.location?.search ?? '');
  const serverUrl =
    params.get('server') ?? (doc.location ? `${doc.location.origin}` : '');
  const token =
    params.get('token') ??
    (globalThis as { prompt?: (q: string) => string | null }).prompt?.('bearer token') ??
    '';
  const app = new ConsoleApp(root as HTMLElement, serverUrl, token);
  void app.start();
  return app;
}

declare const window: (Window & typeof globalThis) | undefined;
if (typeof window !== 'undefined' && typeof document !== 'undefined') {
  if (document.readyState === 'loading') {
    document.addEventListener('DOMContentLoaded', () => mountFromDocument(document));
  } else {
    mountFromDocument(document);
  }
}
