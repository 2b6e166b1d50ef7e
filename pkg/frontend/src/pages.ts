/* Screens for the booth wizard. Each page has a render function that
   returns markup and a bind function that wires its buttons; bindApp
   dispatches on the wizard's current page. The envelope tray only ever
   appears on the two scan pages, so the printed code is on paper before
   an envelope can be picked. */

import { ReceiptBundle } from "./api.js";
import { cardSvg, payloadTag } from "./cards.js";
import { Wizard } from "./wizard.js";

type Run = (work: () => Promise<unknown> | void) => void;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function receiptCard(payload: string, label: string): string {
  return `
    <figure class="card">
      ${cardSvg(payload)}
      <figcaption>${esc(label)} <code>${esc(payloadTag(payload))}</code></figcaption>
    </figure>
  `;
}

function envelopeTray(w: Wizard): string {
  if (w.stack.length === 0) {
    return `<p class="muted">The tray is empty. Ask a poll worker to restock, then refresh.</p>`;
  }
  const cards = w.stack.map(
    (e) => `
      <button class="card pick" data-envelope="${e}">
        ${cardSvg(e)}
        <span><code>${esc(payloadTag(e))}</code></span>
      </button>`,
  );
  return `<div class="tray">${cards.join("")}</div>`;
}

function bindTray(w: Wizard, run: Run, scan: (envelope: string) => Promise<void>) {
  if (!w.stackLoaded) {
    run(() => w.refreshStack());
  }
  document.querySelectorAll<HTMLButtonElement>("[data-envelope]").forEach((btn) => {
    btn.addEventListener("click", () => run(() => scan(btn.dataset.envelope!)));
  });
  document
    .querySelector<HTMLButtonElement>("#refreshTray")
    ?.addEventListener("click", () => run(() => w.refreshStack()));
}

function renderStart() {
  return `
    <section class="page" data-page="start">
      <h1>Registration booth</h1>
      <p>This booth prints your voting credential. It can also print practice
         copies that look exactly like the real one, in case anyone ever
         pressures you to hand a credential over.</p>
      <p>Get a ticket from the check-in desk first.</p>
      <button id="begin">Begin</button>
    </section>
  `;
}

function bindStart(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#begin")?.addEventListener("click", () => {
    run(() => w.begin());
  });
}

function renderCheckIn() {
  return `
    <section class="page" data-page="check-in">
      <h1>Scan your ticket</h1>
      <p>Hold the ticket under the reader, or paste its code below.</p>
      <label>Ticket code <input id="ticket" autocomplete="off"></label>
      <button id="checkin">Scan ticket</button>
      <details class="desk">
        <summary>Check-in desk (demo)</summary>
        <p>In a real precinct the desk issues tickets on its own terminal.</p>
        <label>Voter id <input id="deskVoter" placeholder="v-001"></label>
        <button id="deskIssue">Issue ticket</button>
      </details>
    </section>
  `;
}

function bindCheckIn(w: Wizard, run: Run) {
  const ticket = document.querySelector<HTMLInputElement>("#ticket")!;
  document.querySelector<HTMLButtonElement>("#checkin")?.addEventListener("click", () => {
    run(() => w.checkIn(ticket.value.trim()));
  });
  document.querySelector<HTMLButtonElement>("#deskIssue")?.addEventListener("click", async () => {
    const voter = document.querySelector<HTMLInputElement>("#deskVoter")!;
    try {
      ticket.value = await w.issueTicket(voter.value.trim());
    } catch {
      run(() => undefined); // repaint so the error banner shows
    }
  });
}

function renderCheckedIn(w: Wizard) {
  return `
    <section class="page" data-page="checked-in">
      <h1>You are checked in</h1>
      <p>Voter <strong>${esc(w.voterId)}</strong>. The booth will print the
         first part of your credential. Take the printout; nothing else
         happens until you do.</p>
      <label class="toggle">
        <input type="checkbox" id="advanced">
        Print several codes and point at one. A tampered booth cannot know
        ahead of time which code you will keep.
      </label>
      <button id="printCommit">Print</button>
    </section>
  `;
}

function bindCheckedIn(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#printCommit")?.addEventListener("click", () => {
    const advanced = document.querySelector<HTMLInputElement>("#advanced")!.checked;
    run(() => w.printCommit(advanced ? 3 : 1));
  });
}

function renderRealConfirm(w: Wizard) {
  if (w.candidates.length > 0) {
    const cards = w.candidates.map(
      (c, i) => `
        <button class="card pick" data-candidate="${i}">
          ${cardSvg(c)}
          <span><code>${esc(payloadTag(c))}</code></span>
        </button>`,
    );
    return `
      <section class="page" data-page="real-confirm">
        <h1>Point at one code</h1>
        <p>All of these printed. Pick the one to keep; the rest are discarded.</p>
        <div class="tray">${cards.join("")}</div>
      </section>
    `;
  }
  return `
    <section class="page" data-page="real-confirm">
      <h1>Check the printout</h1>
      <p>The paper in the tray should show this code. Keep it.</p>
      ${receiptCard(w.commitCard ?? "", "credential, part one")}
      <button id="confirmPrinted">I have the printout</button>
    </section>
  `;
}

function bindRealConfirm(w: Wizard, run: Run) {
  document.querySelectorAll<HTMLButtonElement>("[data-candidate]").forEach((btn) => {
    btn.addEventListener("click", () => run(() => w.chooseCandidate(Number(btn.dataset.candidate))));
  });
  document.querySelector<HTMLButtonElement>("#confirmPrinted")?.addEventListener("click", () => {
    run(() => w.confirmPrinted());
  });
}

function renderRealScan(w: Wizard) {
  return `
    <section class="page" data-page="real-scan">
      <h1>Pick a sealed envelope</h1>
      <p>Take any envelope from the tray and scan it. The booth cannot see
         which one you will choose.</p>
      ${envelopeTray(w)}
      <button id="refreshTray" class="quiet">Refresh the tray</button>
    </section>
  `;
}

function bindRealScan(w: Wizard, run: Run) {
  bindTray(w, run, (e) => w.scanRealEnvelope(e));
}

function renderRealReady(w: Wizard) {
  return `
    <section class="page" data-page="real-ready">
      <h1>Your credential printed</h1>
      <p>This second printout completes your real credential. Keep both
         halves together and keep them private.</p>
      ${receiptCard(w.realCard ?? "", "credential, part two")}
      <button id="takeReal">I took it</button>
    </section>
  `;
}

function bindRealReady(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#takeReal")?.addEventListener("click", () => {
    run(() => w.takeReal());
  });
}

function renderTestIntro() {
  return `
    <section class="page" data-page="test-intro">
      <h1>Practice credentials</h1>
      <p>The booth can print practice credentials. They look identical to the
         real one and scan like it, but votes cast with one are set aside
         during counting. If anyone demands your credential, hand over a
         practice copy.</p>
      <button id="wantTests">Print a practice copy</button>
      <button id="skipTests" class="quiet">No thanks, finish up</button>
    </section>
  `;
}

function bindTestIntro(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#wantTests")?.addEventListener("click", () => {
    run(() => w.decideTests(true));
  });
  document.querySelector<HTMLButtonElement>("#skipTests")?.addEventListener("click", () => {
    run(() => w.decideTests(false));
  });
}

function renderTestPrepare() {
  return `
    <section class="page" data-page="test-prepare">
      <h1>Mark your real one first</h1>
      <p>Put a private mark on the real printouts now: a dot, a folded
         corner, anything only you would notice. Printouts made from here on
         are practice copies and will look the same.</p>
      <button id="marked">Done, continue</button>
    </section>
  `;
}

function bindTestPrepare(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#marked")?.addEventListener("click", () => {
    run(() => w.markedReal());
  });
}

function renderTestScan(w: Wizard) {
  return `
    <section class="page" data-page="test-scan">
      <h1>Scan an envelope for the practice copy</h1>
      <p>Take another envelope from the tray and scan it.</p>
      ${envelopeTray(w)}
      <button id="refreshTray" class="quiet">Refresh the tray</button>
    </section>
  `;
}

function bindTestScan(w: Wizard, run: Run) {
  bindTray(w, run, (e) => w.scanTestEnvelope(e));
}

function renderTestReady(w: Wizard) {
  const latest = w.fakeCards[w.fakeCards.length - 1] ?? "";
  return `
    <section class="page" data-page="test-ready">
      <h1>Practice copy printed</h1>
      <p>Copy ${w.fakeCards.length} is in the tray. It can never activate,
         but nobody can tell that by looking at it.</p>
      ${receiptCard(latest, "practice credential")}
      <button id="anotherTest">Print another</button>
      <button id="finishTests" class="quiet">Finish up</button>
    </section>
  `;
}

function bindTestReady(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#anotherTest")?.addEventListener("click", () => {
    run(() => w.anotherTest(true));
  });
  document.querySelector<HTMLButtonElement>("#finishTests")?.addEventListener("click", () => {
    run(() => w.anotherTest(false));
  });
}

function bundleRows(bundles: ReceiptBundle[]): string {
  return bundles
    .map(
      (b, i) => `
        <li>
          ${b.kind === "real" ? "real credential" : "practice copy"}
          <code>${esc(payloadTag(b.credential_receipt))}</code>
          <button data-activate="${i}">Check</button>
        </li>`,
    )
    .join("");
}

function renderFinish(w: Wizard) {
  const checkout =
    w.checkoutEntry === null
      ? `<button id="checkout">Record my exit</button>`
      : `<p>Exit recorded, public entry #${w.checkoutEntry}.</p>`;
  return `
    <section class="page" data-page="finish">
      <h1>All done</h1>
      <p>Show this exit slip at the desk on your way out.</p>
      ${receiptCard(w.transportCard ?? "", "exit slip")}
      ${checkout}
      <button id="toActivate" class="quiet">Activation desk</button>
    </section>
  `;
}

function bindFinish(w: Wizard, run: Run) {
  document.querySelector<HTMLButtonElement>("#checkout")?.addEventListener("click", () => {
    run(() => w.checkOut());
  });
  document.querySelector<HTMLButtonElement>("#toActivate")?.addEventListener("click", () => {
    run(() => w.beginActivation());
  });
}

function renderActivate(w: Wizard) {
  let report = "";
  if (w.report !== null) {
    const checks = w.report.checks
      .map((c) => `<tr><td>${esc(c.name)}</td><td class="${c.status}">${c.status}</td></tr>`)
      .join("");
    report = `
      <div class="report">
        <p class="verdict ${w.report.verdict}">Verdict: ${w.report.verdict}</p>
        <table>${checks}</table>
      </div>
    `;
  }
  return `
    <section class="page" data-page="activate">
      <h1>Activation desk</h1>
      <p>Each printout from this booth can be checked here. Only the real
         one passes; the booth would be caught if it had cheated.</p>
      <ul class="bundles">${bundleRows(w.bundles)}</ul>
      ${report}
    </section>
  `;
}

function bindActivate(w: Wizard, run: Run) {
  document.querySelectorAll<HTMLButtonElement>("[data-activate]").forEach((btn) => {
    btn.addEventListener("click", () => {
      run(() => w.activate(w.bundles[Number(btn.dataset.activate)]));
    });
  });
}

export function renderApp(w: Wizard): string {
  const banner = w.lastError
    ? `<div class="error" role="alert">${esc(w.lastError.code)}: ${esc(w.lastError.message)}</div>`
    : "";
  const body = {
    "start": renderStart,
    "check-in": renderCheckIn,
    "checked-in": () => renderCheckedIn(w),
    "real-confirm": () => renderRealConfirm(w),
    "real-scan": () => renderRealScan(w),
    "real-ready": () => renderRealReady(w),
    "test-intro": renderTestIntro,
    "test-prepare": renderTestPrepare,
    "test-scan": () => renderTestScan(w),
    "test-ready": () => renderTestReady(w),
    "finish": () => renderFinish(w),
    "activate": () => renderActivate(w),
  }[w.page]();
  return `${banner}${body}`;
}

export function bindApp(w: Wizard, rerender: () => void) {
  const run: Run = (work) => {
    try {
      const out = work();
      if (out instanceof Promise) {
        out.then(rerender, rerender);
      } else {
        rerender();
      }
    } catch {
      rerender();
    }
  };
  const binder = {
    "start": bindStart,
    "check-in": bindCheckIn,
    "checked-in": bindCheckedIn,
    "real-confirm": bindRealConfirm,
    "real-scan": bindRealScan,
    "real-ready": bindRealReady,
    "test-intro": bindTestIntro,
    "test-prepare": bindTestPrepare,
    "test-scan": bindTestScan,
    "test-ready": bindTestReady,
    "finish": bindFinish,
    "activate": bindActivate,
  }[w.page];
  binder(w, run);
}
