// @vitest-environment jsdom
/* Scripted end-to-end session against the real service: the toy 4-query /
 * 2-query-group problem, gqsa, a seeded tie-break that selects query group 2
 * at the root. Answering q3 = no identifies theta3 in one answer; the
 * transcript downloaded from the UI must replay identically through the CLI. */

import { spawn, spawnSync, type ChildProcessWithoutNullStreams } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { mount, type AppHandle } from "../src/app.js";

const REPO = resolve(process.cwd(), "..");
const TOY2 = join(REPO, "tests", "data", "toy2.yaml");
const PORT = 8700 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcessWithoutNullStreams;
let handle: AppHandle | null = null;

async function waitFor<T>(probe: () => T | null | undefined | false, what: string,
                          timeoutMs = 10000): Promise<T> {
  const t0 = Date.now();
  for (;;) {
    const got = probe();
    if (got) return got;
    if (Date.now() - t0 > timeoutMs) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

function $(sel: string): HTMLElement | null {
  return document.querySelector<HTMLElement>(sel);
}

beforeAll(async () => {
  server = spawn("querylearn",
    ["serve", "--serve-addr", `127.0.0.1:${PORT}`, "--problem", TOY2],
    { stdio: ["ignore", "pipe", "pipe"] });
  await waitForServer();
});

afterAll(() => {
  handle?.dispose();
  server?.kill();
});

async function waitForServer() {
  const t0 = Date.now();
  for (;;) {
    try {
      const res = await fetch(`${BASE}/api/datasets`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() - t0 > 20000) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 100));
  }
}

it("drives a gqsa session to theta3 and the transcript replays via the CLI", async () => {
  document.body.innerHTML = '<div id="app"></div>';
  location.hash = "";
  handle = mount(document.getElementById("app")!, { base: BASE });

  // problem list -> session form
  const row = await waitFor(() => $("[data-dataset-row]"), "the problem list");
  expect(row.textContent).toContain("3"); // 3 objects
  row.querySelector("button")!.click();
  const form = await waitFor(() => $("[data-start-form]"), "the session form");

  // gqsa with the seeded tie-break that picks query group 2 at the root
  (form.querySelector("#strategy-gqsa") as HTMLInputElement).click();
  const tie = form.querySelector("select[name=tie_break]") as HTMLSelectElement;
  tie.value = "random";
  tie.dispatchEvent(new Event("change", { bubbles: true }));
  const seed = form.querySelector("input[name=seed]") as HTMLInputElement;
  seed.value = "2";
  form.dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));

  // live session: the suggestion panel mirrors the server's payload
  const panel = await waitFor(() => $("[data-suggestion]"), "the suggestion panel");
  expect(panel.querySelector("h2")!.textContent).toBe("suggested: query group 2");
  const picks = [...panel.querySelectorAll<HTMLInputElement>("input[name=pick]")];
  expect(picks.map((p) => p.value)).toEqual(["q3", "q4"]); // nothing outside the suggestion
  expect(panel.textContent).toContain("90.0%");
  expect(panel.textContent).toContain("10.0%");

  const sid = $("[data-session]")!.getAttribute("data-session")!;
  expect(location.hash).toBe(`#/sessions/${sid}`);

  // answer q3 = no
  picks.find((p) => p.value === "q3")!.click();
  (panel.querySelector("button[data-answer='0']") as HTMLButtonElement).click();
  (panel.querySelector("button.submit") as HTMLButtonElement).click();

  const banner = await waitFor(() => $("[data-outcome]"), "the outcome banner");
  expect(banner.textContent).toContain("identified: object theta3");
  expect(banner.textContent).toContain("after 1 answer");
  expect(document.querySelectorAll(".timeline li").length).toBeLessThanOrEqual(2);
  expect($("[data-surviving]")!.textContent).toBe("1");

  // reload mid-session view: a fresh mount resumes purely from server state
  handle.dispose();
  document.body.innerHTML = '<div id="app"></div>';
  handle = mount(document.getElementById("app")!, { base: BASE });
  const again = await waitFor(() => $("[data-outcome]"), "the resumed outcome banner");
  expect(again.textContent).toContain("theta3");

  // transcript download offers the full document as a data link
  ($("button.download") as HTMLButtonElement).click();
  const link = await waitFor(
    () => $(".download-slot a") as HTMLAnchorElement | null, "the transcript link");
  expect(link.getAttribute("download")).toBe(`session-${sid}.json`);
  const href = link.getAttribute("href")!;
  expect(href.startsWith("data:application/json")).toBe(true);
  const text = decodeURIComponent(href.slice(href.indexOf(",") + 1));
  const doc = JSON.parse(text);
  expect(doc.format).toBe("session-transcript");
  expect(doc.strategy).toBe("gqsa");
  expect(doc.seed).toBe(2);
  expect(doc.status).toBe("identified");
  expect(doc.outcome).toEqual({ object: "theta3" });
  expect(doc.steps.length).toBeLessThanOrEqual(2);

  // and the CLI replays it against the same problem document
  const dir = mkdtempSync(join(tmpdir(), "querylearn-ui-"));
  const file = join(dir, "transcript.json");
  writeFileSync(file, text);
  const replay = spawnSync("querylearn",
    ["replay", "--problem", TOY2, "--transcript", file],
    { encoding: "utf8" });
  expect(replay.stderr).toBe("");
  expect(replay.status).toBe(0);
  expect(replay.stdout).toContain("status=identified");
  expect(replay.stdout).toContain("theta3");
}, 30000);
