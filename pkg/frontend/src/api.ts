/* HTTP client for the registrar service. Every receipt, envelope, and
   ticket stays an opaque base64 string end to end: the kiosk renders
   what the server printed and never looks inside a payload. */

export interface ServiceParams {
  profile: string;
  ledger_length: number;
  roll: { voter_id: string; name: string }[];
  entities: { name: string; pk: string }[];
  ticket_lifetime?: number;
}

export interface TicketIssued {
  ticket: string;
  voter_id: string;
  issued_at: number;
}

export interface SessionOpened {
  session_id: string;
  phase: string;
  idle_timeout: number;
}

export interface CheckedIn {
  phase: string;
  voter_id: string;
}

export interface CommitPrinted {
  phase: string;
  receipts: string[];
}

export interface CommitSelected {
  phase: string;
  receipt: string;
}

export interface RealScanned {
  phase: string;
  credential_receipt: string;
  transport_receipt: string;
}

export interface ReceiptBundle {
  kind: string;
  ticket: string | null;
  commit_receipt: string;
  envelope: string;
  credential_receipt: string;
  transport_receipt: string | null;
}

export interface FakeMade {
  phase: string;
  bundle: ReceiptBundle;
}

export interface SessionFinished {
  phase: string;
  transport_receipt: string;
  bundles: ReceiptBundle[];
}

export interface SessionLog {
  phase: string;
  log: string[];
}

export interface CheckoutDone {
  entry_index: number;
  registration: string;
}

export interface ActivationCheck {
  name: string;
  status: "pass" | "fail" | "unavailable";
  detail: string;
}

export interface ActivationReport {
  verdict: "pass" | "fail";
  checks: ActivationCheck[];
  entity: string | null;
  entries: number[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/* What the wizard needs from the service; ServiceApi is the real thing,
   tests substitute a scripted one. */
export interface BoothService {
  params(): Promise<ServiceParams>;
  issueTicket(voterId: string): Promise<TicketIssued>;
  envelopeStack(): Promise<{ envelopes: string[] }>;
  printEnvelopes(count: number): Promise<{ envelopes: string[] }>;
  openSession(): Promise<SessionOpened>;
  sessionStatus(sid: string): Promise<SessionLog>;
  sessionLog(sid: string): Promise<SessionLog>;
  checkIn(sid: string, ticket: string): Promise<CheckedIn>;
  printCommit(sid: string, count: number): Promise<CommitPrinted>;
  selectCommit(sid: string, index: number): Promise<CommitSelected>;
  scanEnvelope(sid: string, envelope: string): Promise<RealScanned>;
  runFake(sid: string, envelope: string): Promise<FakeMade>;
  finish(sid: string): Promise<SessionFinished>;
  checkout(transportReceipt: string): Promise<CheckoutDone>;
  activate(bundle: ReceiptBundle, expectedVoter?: string, enroll?: boolean): Promise<ActivationReport>;
}

export class ServiceApi implements BoothService {
  constructor(
    readonly base: string,
    private fetcher: typeof fetch = (input, init) => fetch(input, init),
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetcher(this.base + path, {
      method,
      headers: body === undefined ? {} : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let code = "http-" + res.status;
      let message = res.statusText;
      try {
        const payload = (await res.json()) as { error?: { code?: string; message?: string } };
        if (payload.error) {
          code = payload.error.code ?? code;
          message = payload.error.message ?? message;
        }
      } catch {
        // not JSON; keep the status line
      }
      throw new ApiError(res.status, code, message);
    }
    return (await res.json()) as T;
  }

  params(): Promise<ServiceParams> {
    return this.call("GET", "/params");
  }

  issueTicket(voterId: string): Promise<TicketIssued> {
    return this.call("POST", "/tickets", { voter_id: voterId });
  }

  envelopeStack(): Promise<{ envelopes: string[] }> {
    return this.call("GET", "/envelopes");
  }

  printEnvelopes(count: number): Promise<{ envelopes: string[] }> {
    return this.call("POST", "/envelopes", { count });
  }

  openSession(): Promise<SessionOpened> {
    return this.call("POST", "/sessions", {});
  }

  sessionStatus(sid: string): Promise<SessionLog> {
    return this.call("GET", `/sessions/${sid}`);
  }

  sessionLog(sid: string): Promise<SessionLog> {
    return this.call("GET", `/sessions/${sid}/log`);
  }

  checkIn(sid: string, ticket: string): Promise<CheckedIn> {
    return this.call("POST", `/sessions/${sid}/checkin`, { ticket });
  }

  printCommit(sid: string, count: number): Promise<CommitPrinted> {
    return this.call("POST", `/sessions/${sid}/commit`, { count });
  }

  selectCommit(sid: string, index: number): Promise<CommitSelected> {
    return this.call("POST", `/sessions/${sid}/select`, { index });
  }

  scanEnvelope(sid: string, envelope: string): Promise<RealScanned> {
    return this.call("POST", `/sessions/${sid}/envelope`, { envelope });
  }

  runFake(sid: string, envelope: string): Promise<FakeMade> {
    return this.call("POST", `/sessions/${sid}/fake`, { envelope });
  }

  finish(sid: string): Promise<SessionFinished> {
    return this.call("POST", `/sessions/${sid}/finish`, {});
  }

  checkout(transportReceipt: string): Promise<CheckoutDone> {
    return this.call("POST", "/checkout", { transport_receipt: transportReceipt });
  }

  activate(bundle: ReceiptBundle, expectedVoter?: string, enroll = false): Promise<ActivationReport> {
    return this.call("POST", "/activate", {
      commit_receipt: bundle.commit_receipt,
      envelope: bundle.envelope,
      credential_receipt: bundle.credential_receipt,
      ticket: bundle.ticket,
      transport_receipt: bundle.transport_receipt,
      expected_voter: expectedVoter ?? null,
      enroll,
      online: true,
    });
  }
}
