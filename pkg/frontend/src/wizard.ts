/* The ceremony as a page machine. Pages advance only along FLOW, every
   crypto step is a service call, and the screen holds nothing but the
   payload strings the server told it to render. */

import {
  ActivationReport,
  ApiError,
  BoothService,
  ReceiptBundle,
} from "./api.js";

export const PAGES = [
  "start",
  "check-in",
  "checked-in",
  "real-confirm",
  "real-scan",
  "real-ready",
  "test-intro",
  "test-prepare",
  "test-scan",
  "test-ready",
  "finish",
  "activate",
] as const;

export type Page = (typeof PAGES)[number];

const FLOW: Record<Page, Page[]> = {
  "start": ["check-in"],
  "check-in": ["checked-in"],
  "checked-in": ["real-confirm"],
  "real-confirm": ["real-scan"],
  "real-scan": ["real-ready"],
  "real-ready": ["test-intro"],
  "test-intro": ["test-prepare", "finish"],
  "test-prepare": ["test-scan"],
  "test-scan": ["test-ready"],
  "test-ready": ["test-scan", "finish"],
  "finish": ["activate"],
  "activate": [],
};

// Where a reloaded tab lands, going by the server's phase. Renders that
// only ever lived on screen (candidate commits) are gone after a
// reload, but the paper in the booth is the voter's real state anyway.
const RESUME: Record<string, Page> = {
  "awaiting-ticket": "check-in",
  "committed": "real-confirm",
  "awaiting-envelope": "real-scan",
  "fake-loop": "test-intro",
  "done": "finish",
};

export class FlowError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "FlowError";
  }
}

export interface TimingRow {
  page: Page;
  visits: number;
  totalMs: number;
}

interface Visit {
  page: Page;
  enteredAt: number;
  leftAt: number | null;
}

export class Wizard {
  page: Page = "start";
  sessionId: string | null = null;
  voterId = "";
  candidates: string[] = [];
  commitCard: string | null = null;
  realCard: string | null = null;
  transportCard: string | null = null;
  fakeCards: string[] = [];
  bundles: ReceiptBundle[] = [];
  stack: string[] = [];
  stackLoaded = false;
  checkoutEntry: number | null = null;
  report: ActivationReport | null = null;
  lastError: { code: string; message: string } | null = null;

  private visits: Visit[];

  constructor(
    private api: BoothService,
    private now: () => number = () => Date.now(),
  ) {
    this.visits = [{ page: "start", enteredAt: this.now(), leftAt: null }];
  }

  private goto(next: Page) {
    if (!FLOW[this.page].includes(next)) {
      throw new FlowError(`no path from ${this.page} to ${next}`);
    }
    const t = this.now();
    this.visits[this.visits.length - 1].leftAt = t;
    this.visits.push({ page: next, enteredAt: t, leftAt: null });
    this.page = next;
  }

  private expect(page: Page, doing: string) {
    if (this.page !== page) {
      throw new FlowError(`${doing} belongs to the ${page} page, not ${this.page}`);
    }
  }

  private async guarded<T>(work: () => Promise<T>): Promise<T> {
    try {
      const out = await work();
      this.lastError = null;
      return out;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastError = { code: err.code, message: err.message };
      }
      throw err;
    }
  }

  begin() {
    this.expect("start", "begin");
    this.goto("check-in");
  }

  /* The desk side of check-in, kept here so the demo works without a
     second screen. A deployed booth would only ever scan. */
  issueTicket(voterId: string): Promise<string> {
    return this.guarded(async () => {
      const issued = await this.api.issueTicket(voterId);
      return issued.ticket;
    });
  }

  async checkIn(ticket: string): Promise<void> {
    this.expect("check-in", "checking in");
    return this.guarded(async () => {
      if (this.sessionId === null) {
        const opened = await this.api.openSession();
        this.sessionId = opened.session_id;
      }
      const done = await this.api.checkIn(this.sessionId, ticket);
      this.voterId = done.voter_id;
      this.goto("checked-in");
    });
  }

  /* candidateCount > 1 is the paranoid option: several codes print and
     the voter points at one, so a rigged kiosk cannot know in advance
     which commitment will count. */
  async printCommit(candidateCount = 1): Promise<void> {
    this.expect("checked-in", "printing the first part");
    return this.guarded(async () => {
      const sid = this.sessionId!;
      const printed = await this.api.printCommit(sid, candidateCount);
      if (printed.receipts.length === 1) {
        this.commitCard = printed.receipts[0];
        this.candidates = [];
      } else {
        this.candidates = printed.receipts;
        this.commitCard = null;
      }
      this.goto("real-confirm");
    });
  }

  async chooseCandidate(index: number): Promise<void> {
    this.expect("real-confirm", "choosing a printed code");
    if (this.candidates.length === 0) {
      throw new FlowError("nothing to choose: a single code was printed");
    }
    return this.guarded(async () => {
      const chosen = await this.api.selectCommit(this.sessionId!, index);
      this.commitCard = chosen.receipt;
      this.candidates = [];
    });
  }

  confirmPrinted() {
    this.expect("real-confirm", "confirming the printout");
    if (this.commitCard === null) {
      throw new FlowError("confirm needs the printed code on screen first");
    }
    this.goto("real-scan");
  }

  refreshStack(): Promise<void> {
    return this.guarded(async () => {
      const got = await this.api.envelopeStack();
      this.stack = got.envelopes;
      this.stackLoaded = true;
    });
  }

  async scanRealEnvelope(envelope: string): Promise<void> {
    this.expect("real-scan", "scanning the envelope");
    return this.guarded(async () => {
      const printed = await this.api.scanEnvelope(this.sessionId!, envelope);
      this.realCard = printed.credential_receipt;
      this.transportCard = printed.transport_receipt;
      this.stack = this.stack.filter((e) => e !== envelope);
      this.goto("real-ready");
    });
  }

  takeReal() {
    this.expect("real-ready", "taking the printout");
    this.goto("test-intro");
  }

  async decideTests(wantTests: boolean): Promise<void> {
    this.expect("test-intro", "deciding on test credentials");
    if (wantTests) {
      this.goto("test-prepare");
      return Promise.resolve();
    }
    return this.finishSession();
  }

  markedReal() {
    this.expect("test-prepare", "marking the real credential");
    this.goto("test-scan");
  }

  async scanTestEnvelope(envelope: string): Promise<void> {
    this.expect("test-scan", "scanning the envelope");
    return this.guarded(async () => {
      const made = await this.api.runFake(this.sessionId!, envelope);
      this.fakeCards.push(made.bundle.credential_receipt);
      this.stack = this.stack.filter((e) => e !== envelope);
      this.goto("test-ready");
    });
  }

  async anotherTest(again: boolean): Promise<void> {
    this.expect("test-ready", "deciding on another test credential");
    if (again) {
      this.goto("test-scan");
      return Promise.resolve();
    }
    return this.finishSession();
  }

  private finishSession(): Promise<void> {
    return this.guarded(async () => {
      const done = await this.api.finish(this.sessionId!);
      this.transportCard = done.transport_receipt;
      this.bundles = done.bundles;
      this.goto("finish");
    });
  }

  async checkOut(): Promise<void> {
    this.expect("finish", "checking out");
    if (this.transportCard === null) {
      throw new FlowError("no transport receipt to present");
    }
    return this.guarded(async () => {
      const done = await this.api.checkout(this.transportCard!);
      this.checkoutEntry = done.entry_index;
    });
  }

  beginActivation() {
    this.expect("finish", "moving to activation");
    this.goto("activate");
  }

  async activate(bundle: ReceiptBundle, enroll = false): Promise<ActivationReport> {
    this.expect("activate", "activating");
    return this.guarded(async () => {
      this.report = await this.api.activate(bundle, this.voterId || undefined, enroll);
      return this.report;
    });
  }

  /* Reload recovery: a fresh Wizard adopts a live session and lands on
     the page the server's phase dictates. */
  resume(sessionId: string): Promise<void> {
    return this.guarded(async () => {
      const status = await this.api.sessionStatus(sessionId);
      const page = RESUME[status.phase];
      if (page === undefined) {
        throw new FlowError(`cannot resume from phase ${status.phase}`);
      }
      this.sessionId = sessionId;
      this.page = page;
      this.visits = [{ page, enteredAt: this.now(), leftAt: null }];
    });
  }

  /* One row per visited page, first-visit order, repeat visits summed. */
  timingRows(): TimingRow[] {
    const rows = new Map<Page, TimingRow>();
    const end = this.now();
    for (const v of this.visits) {
      const row = rows.get(v.page) ?? { page: v.page, visits: 0, totalMs: 0 };
      row.visits += 1;
      row.totalMs += (v.leftAt ?? end) - v.enteredAt;
      rows.set(v.page, row);
    }
    return [...rows.values()];
  }

  timingCsv(): string {
    const lines = ["page,visits,total_ms"];
    for (const row of this.timingRows()) {
      lines.push(`${row.page},${row.visits},${row.totalMs}`);
    }
    return lines.join("\n") + "\n";
  }

  visitedPages(): Page[] {
    return this.visits.map((v) => v.page);
  }
}
