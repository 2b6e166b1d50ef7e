// @vitest-environment happy-dom

import { describe, expect, it } from "vitest";
import { bindApp, renderApp } from "../src/pages.js";
import { Wizard } from "../src/wizard.js";
import { FakeApi } from "./fake-api.js";

function mount(w: Wizard) {
  const paint = () => {
    document.body.innerHTML = renderApp(w);
    bindApp(w, paint);
  };
  paint();
}

function shownPage(): string | null {
  return document.querySelector(".page")?.getAttribute("data-page") ?? null;
}

function click(selector: string) {
  const el = document.querySelector<HTMLButtonElement>(selector);
  expect(el, selector).not.toBeNull();
  el!.click();
}

const settle = () => new Promise((r) => setTimeout(r, 0));

describe("screens", () => {
  it("opens on the start page and begin moves to check-in", () => {
    const w = new Wizard(new FakeApi());
    mount(w);
    expect(shownPage()).toBe("start");
    click("#begin");
    expect(shownPage()).toBe("check-in");
    expect(document.querySelector("#ticket")).not.toBeNull();
  });

  it("shows the printed code with no envelopes in reach, then the tray", async () => {
    const w = new Wizard(new FakeApi());
    w.begin();
    await w.checkIn("tick-1");
    await w.printCommit();
    mount(w);
    expect(shownPage()).toBe("real-confirm");
    expect(document.querySelector("figure.card")).not.toBeNull();
    expect(document.querySelectorAll("[data-envelope]")).toHaveLength(0);

    click("#confirmPrinted");
    expect(shownPage()).toBe("real-scan");
    await settle(); // the tray loads itself on first view
    expect(document.querySelectorAll("[data-envelope]")).toHaveLength(3);
  });

  it("scanning an envelope card advances to the credential page", async () => {
    const w = new Wizard(new FakeApi());
    w.begin();
    await w.checkIn("tick-1");
    await w.printCommit();
    w.confirmPrinted();
    await w.refreshStack();
    mount(w);
    click('[data-envelope="env-2"]');
    await settle();
    expect(shownPage()).toBe("real-ready");
    expect(w.realCard).toBe("cred-1");
  });

  it("surfaces a service refusal verbatim and stays on the page", async () => {
    const api = new FakeApi();
    api.failOn = { method: "checkIn", code: "stale-ticket" };
    const w = new Wizard(api);
    w.begin();
    mount(w);
    document.querySelector<HTMLInputElement>("#ticket")!.value = "tick-old";
    click("#checkin");
    await settle();
    expect(shownPage()).toBe("check-in");
    const banner = document.querySelector(".error");
    expect(banner).not.toBeNull();
    expect(banner!.textContent).toContain("stale-ticket");
    expect(banner!.textContent).toContain("scripted stale-ticket");
  });

  it("the advanced toggle prints several codes to point at", async () => {
    const w = new Wizard(new FakeApi());
    w.begin();
    await w.checkIn("tick-1");
    mount(w);
    document.querySelector<HTMLInputElement>("#advanced")!.checked = true;
    click("#printCommit");
    await settle();
    expect(shownPage()).toBe("real-confirm");
    expect(document.querySelectorAll("[data-candidate]")).toHaveLength(3);
    expect(document.querySelector("#confirmPrinted")).toBeNull();

    click('[data-candidate="2"]');
    await settle();
    expect(w.commitCard).toBe("commit-c2");
    expect(document.querySelector("#confirmPrinted")).not.toBeNull();
  });

  it("finish shows the exit slip and checkout records an entry", async () => {
    const w = new Wizard(new FakeApi());
    w.begin();
    await w.checkIn("tick-1");
    await w.printCommit();
    w.confirmPrinted();
    await w.scanRealEnvelope("env-1");
    w.takeReal();
    await w.decideTests(false);
    mount(w);
    expect(shownPage()).toBe("finish");
    click("#checkout");
    await settle();
    expect(document.body.textContent).toContain("entry #7");

    click("#toActivate");
    expect(shownPage()).toBe("activate");
    click('[data-activate="0"]');
    await settle();
    expect(document.querySelector(".verdict")!.textContent).toContain("pass");
  });
});
