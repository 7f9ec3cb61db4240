// Server-sent alert feed over fetch streaming (works in browsers and
// node alike, no EventSource dependency). Reconnects with the last seen
// cursor so no alert is dropped across hiccups.

import type { Alert } from './types';

const RECONNECT_DELAY_MS = 500;

export class AlertFeed {
  private cursor = 0;
  private stopped = false;
  private controller: AbortController | null = null;
  onStatus: ((connected: boolean) => void) | null = null;

  constructor(
    private serverUrl: string,
    private onAlert: (alert: Alert) => void,
  ) {}

  start(): void {
    void this.loop();
  }

  stop(): void {
    this.stopped = true;
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    while (!this.stopped) {
      try {
        await this.consume();
      } catch {
        // disconnects are expected; the banner reflects it
      }
      this.onStatus?.(false);
      if (!this.stopped) {
        await new Promise((resolve) => setTimeout(resolve, RECONNECT_DELAY_MS));
      }
    }
  }

  private async consume(): Promise<void> {
    this.controller = new AbortController();
    const response = await fetch(`${this.serverUrl}/events?cursor=${this.cursor}`, {
      signal: this.controller.signal,
    });
    if (!response.ok || !response.body) throw new Error(`feed: ${response.status}`);
    this.onStatus?.(true);
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = '';
    for (;;) {
      const { done, value } = await reader.read();
      if (done || this.stopped) return;
      buffer += decoder.decode(value, { stream: true });
      let boundary;
      while ((boundary = buffer.indexOf('\n\n')) >= 0) {
        this.handleFrame(buffer.slice(0, boundary));
        buffer = buffer.slice(boundary + 2);
      }
    }
  }

  private handleFrame(frame: string): void {
    let eventName = 'message';
    const data: string[] = [];
    for (const line of frame.split('\n')) {
      if (line.startsWith('event:')) eventName = line.slice(6).trim();
      else if (line.startsWith('data:')) data.push(line.slice(5).trim());
    }
    if (eventName !== 'alert' || data.length === 0) return;
    const alert = JSON.parse(data.join('\n')) as Alert;
    this.cursor = Math.max(this.cursor, alert.alert_seq + 1);
    this.onAlert(alert);
  }
}
