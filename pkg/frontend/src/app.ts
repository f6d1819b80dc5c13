/* The operator console. One screen lists problems and starts sessions; the
 * other drives a live session. All algorithmic state lives on the server: this
 * file renders the latest SessionResource and posts answers, nothing more.
 * Reloading (or pasting a #/sessions/<id> URL) resumes from server state. */

import {
  ApiError,
  makeClient,
  type Client,
  type DatasetSummary,
  type SessionResource,
  type Suggestion,
} from "./api.js";
import {
  STRATEGY_BLURBS,
  availableStrategies,
  describeStep,
  outcomeLabel,
  pct,
  shortId,
  survivingNoun,
  transcriptHref,
} from "./format.js";

const POLL_MS = 4000;

export interface MountOptions {
  base?: string;
}

export interface AppHandle {
  dispose(): void;
}

type El = HTMLElement;

function h(tag: string, attrs: Record<string, string> = {}, ...children: (El | string)[]): El {
  const el = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, v);
  for (const c of children) el.append(c);
  return el;
}

function sessionIdFromHash(hash: string): string | null {
  const m = /^#\/sessions\/([A-Za-z0-9]+)$/.exec(hash);
  return m ? m[1] : null;
}

export function mount(root: El, opts: MountOptions = {}): AppHandle {
  const client = makeClient(opts.base ?? "");
  let generation = 0; // bumped on every navigation; stale async renders bail out
  let pollTimer: ReturnType<typeof setTimeout> | null = null;

  // ---- shared scraps ------------------------------------------------------

  function clearPoll() {
    if (pollTimer !== null) clearTimeout(pollTimer);
    pollTimer = null;
  }

  function errorBox(message: string): El {
    return h("div", { class: "error", role: "alert" }, message);
  }

  function describeError(err: unknown): string {
    if (err instanceof ApiError) {
      const d = err.detail;
      if (typeof d === "string") return d;
      if (d && typeof d === "object" && "message" in d) {
        return String((d as { message: unknown }).message);
      }
      return `request failed with ${err.status}`;
    }
    return err instanceof Error ? err.message : String(err);
  }

  // ---- home: problem list and session form --------------------------------

  async function renderHome(gen: number) {
    clearPoll();
    let datasets: DatasetSummary[];
    try {
      datasets = await client.listDatasets();
    } catch (err) {
      if (gen !== generation) return;
      root.replaceChildren(errorBox(`cannot reach the service: ${describeError(err)}`));
      return;
    }
    if (gen !== generation) return;

    const page = h("div", { class: "home" });
    page.append(h("h1", {}, "querylearn"));
    page.append(h("p", { class: "tagline" },
      "pick a problem, start an identification session, answer queries as the situation unfolds"));

    const list = h("section", { class: "datasets" }, h("h2", {}, "problems"));
    if (datasets.length === 0) {
      list.append(h("p", { class: "empty" },
        "nothing loaded yet — upload a problem document below, or start the server with --problem"));
    }
    const table = h("table", {},
      h("thead", {}, h("tr", {},
        h("th", {}, "id"), h("th", {}, "objects"), h("th", {}, "queries"),
        h("th", {}, "object groups"), h("th", {}, "query groups"),
        h("th", {}, "noise"), h("th", {}, ""))));
    const tbody = h("tbody");
    for (const d of datasets) {
      const open = h("button", { type: "button" }, "new session") as HTMLButtonElement;
      open.addEventListener("click", () => showForm(d));
      const row = h("tr", { "data-dataset-row": d.id },
        h("td", { class: "mono", title: d.id }, shortId(d.id)),
        h("td", {}, String(d.objects)), h("td", {}, String(d.queries)),
        h("td", {}, String(d.object_groups)), h("td", {}, String(d.query_groups)),
        h("td", {}, d.has_noise ? "declared" : "—"),
        h("td", {}, open));
      tbody.append(row);
    }
    table.append(tbody);
    if (datasets.length > 0) list.append(table);

    // upload: problem documents as JSON (the YAML loader lives server-side)
    const fileInput = h("input", { type: "file", accept: ".json,application/json" }) as HTMLInputElement;
    const uploadNote = h("span", { class: "upload-note" });
    fileInput.addEventListener("change", async () => {
      const file = fileInput.files?.[0];
      if (!file) return;
      uploadNote.textContent = "uploading…";
      try {
        const doc = JSON.parse(await file.text()) as Record<string, unknown>;
        const added = await client.uploadDataset(doc);
        uploadNote.textContent = `loaded ${shortId(added.id)}`;
        void renderHome(generation);
      } catch (err) {
        uploadNote.textContent = "";
        list.append(errorBox(`upload failed: ${describeError(err)}`));
      }
    });
    list.append(h("p", { class: "upload" }, "upload problem document (JSON): ", fileInput, " ", uploadNote));
    page.append(list);

    const formSlot = h("section", { class: "start-slot" });
    page.append(formSlot);
    root.replaceChildren(page);

    function showForm(d: DatasetSummary) {
      formSlot.replaceChildren(sessionForm(d));
      formSlot.scrollIntoView?.({ block: "nearest" });
    }
  }

  function sessionForm(d: DatasetSummary): El {
    const form = h("form", { class: "start", "data-start-form": d.id });
    form.append(h("h2", {}, `new session on ${shortId(d.id)}`));

    const strategies = availableStrategies(d);
    const stratBox = h("fieldset", { class: "strategies" }, h("legend", {}, "strategy"));
    strategies.forEach((s, i) => {
      const input = h("input", {
        type: "radio", name: "strategy", value: s, id: `strategy-${s}`,
      }) as HTMLInputElement;
      if (i === 0) input.checked = true;
      input.addEventListener("change", syncDependentControls);
      stratBox.append(h("label", { class: "strategy", for: `strategy-${s}` },
        input, ` ${s} `, h("small", {}, STRATEGY_BLURBS[s] ?? "")));
    });
    form.append(stratBox);

    const tieSelect = h("select", { name: "tie_break" },
      h("option", { value: "index" }, "index (deterministic)"),
      h("option", { value: "random" }, "random (seeded)")) as HTMLSelectElement;
    const seedInput = h("input", {
      type: "number", name: "seed", placeholder: "seed", step: "1",
    }) as HTMLInputElement;
    const seedLabel = h("label", { class: "seed" }, "seed ", seedInput);
    tieSelect.addEventListener("change", syncDependentControls);
    form.append(h("p", { class: "tie" },
      h("label", {}, "tie-break ", tieSelect), " ", seedLabel));

    // noise override (model / p); unchecked means the dataset's declaration
    const noiseToggle = h("input", { type: "checkbox", name: "noise_override" }) as HTMLInputElement;
    const modelSelect = h("select", { name: "noise_model" },
      h("option", { value: "1" }, "model 1 (counting)"),
      h("option", { value: "2" }, "model 2 (binomial)")) as HTMLSelectElement;
    const pInput = h("input", {
      type: "number", name: "noise_p", min: "0", max: "0.5", step: "0.05", value: "0.25",
    }) as HTMLInputElement;
    noiseToggle.addEventListener("change", syncDependentControls);
    modelSelect.addEventListener("change", syncDependentControls);
    const noiseBox = h("fieldset", { class: "noise" },
      h("legend", {}, "noise"),
      h("label", {}, noiseToggle, " override the declared model"),
      h("label", { class: "noise-model" }, " model ", modelSelect),
      h("label", { class: "noise-p" }, " p ", pInput));
    form.append(noiseBox);

    const startBtn = h("button", { type: "submit" }, "start session") as HTMLButtonElement;
    const errSlot = h("div", { class: "form-errors" });
    form.append(h("p", {}, startBtn), errSlot);

    function picked(): string {
      const checked = form.querySelector<HTMLInputElement>("input[name=strategy]:checked");
      return checked ? checked.value : strategies[0];
    }

    function syncDependentControls() {
      const s = picked();
      if (s === "random") {
        // the random baseline is defined by its seed; index ties make no sense
        tieSelect.value = "random";
        tieSelect.disabled = true;
      } else {
        tieSelect.disabled = false;
      }
      const randomTie = tieSelect.value === "random";
      seedLabel.classList.toggle("hidden", !randomTie);
      if (randomTie && seedInput.value === "") {
        seedInput.value = String(Math.floor(Math.random() * 2 ** 31));
      }
      const noisy = s.startsWith("noisy-");
      noiseBox.classList.toggle("hidden", !noisy);
      const override = noiseToggle.checked;
      modelSelect.disabled = !override;
      pInput.disabled = !override || modelSelect.value !== "2";
    }
    syncDependentControls();

    form.addEventListener("submit", async (ev) => {
      ev.preventDefault();
      errSlot.replaceChildren();
      const strategy = picked();
      const req: Parameters<Client["createSession"]>[0] = { dataset: d.id, strategy };
      if (tieSelect.value === "random") {
        req.tie_break = "random";
        req.seed = Number(seedInput.value);
        if (!Number.isFinite(req.seed)) {
          errSlot.append(errorBox("a random tie-break needs an integer seed"));
          return;
        }
      }
      if (strategy.startsWith("noisy-") && noiseToggle.checked) {
        const model = Number(modelSelect.value) as 1 | 2;
        req.noise = model === 2 ? { model, p: Number(pInput.value) } : { model };
      }
      startBtn.disabled = true;
      try {
        const session = await client.createSession(req);
        location.hash = `#/sessions/${session.id}`;
      } catch (err) {
        startBtn.disabled = false;
        errSlot.append(errorBox(describeError(err)));
      }
    });
    return form;
  }

  // ---- session screen ------------------------------------------------------

  async function renderSession(gen: number, sid: string, preloaded?: SessionResource,
                               failureNote?: string) {
    clearPoll();
    let session: SessionResource;
    try {
      session = preloaded ?? (await client.getSession(sid));
    } catch (err) {
      if (gen !== generation) return;
      root.replaceChildren(
        h("p", {}, h("a", { href: "#" }, "← problems")),
        errorBox(describeError(err)));
      return;
    }
    if (gen !== generation) return;

    const page = h("div", { class: "session", "data-session": session.id });
    page.append(h("header", {},
      h("a", { href: "#" }, "← problems"),
      h("h1", {}, `session ${session.id}`),
      h("p", { class: "meta" },
        `problem ${shortId(session.dataset)} · ${session.strategy} · ${session.objective}`,
        " · ", h("span", { class: `status status-${session.status}` }, session.status))));

    const errSlot = h("div", { class: "session-errors" });
    if (failureNote) errSlot.append(errorBox(failureNote));
    page.append(errSlot);

    if (session.status === "identified") {
      page.append(h("div", { class: "banner banner-identified", "data-outcome": "" },
        `identified: ${outcomeLabel(session.outcome)} after ${session.steps.length} ` +
        (session.steps.length === 1 ? "answer" : "answers")));
    } else if (session.status === "failed") {
      const last = session.steps[session.steps.length - 1];
      page.append(h("div", { class: "banner banner-failed", "data-outcome": "" },
        last
          ? `failed: answering ${last.query} = ${last.response ? "yes" : "no"} eliminated every candidate`
          : "failed"));
    }

    if (session.suggestion) page.append(suggestionPanel(sid, session.suggestion, errSlot));

    // state panel: gauge plus the posterior's head
    const noun = survivingNoun(session.objective);
    const statePanel = h("section", { class: "statepanel" },
      h("h2", {}, "where things stand"),
      h("p", { class: "gauge" },
        h("strong", { "data-surviving": "" }, String(session.surviving)), ` ${noun} remain`));
    if (session.top_outcomes.length > 0) {
      const ol = h("ol", { class: "top-outcomes" });
      for (const t of session.top_outcomes) {
        const bar = h("span", { class: "bar" });
        bar.style.width = `${Math.round(t.probability * 100)}%`;
        ol.append(h("li", {}, bar,
          h("span", { class: "who" }, outcomeLabel(t.outcome)),
          h("span", { class: "prob" }, pct(t.probability))));
      }
      statePanel.append(ol);
    }
    page.append(statePanel);

    // history timeline
    const history = h("section", { class: "history" }, h("h2", {}, "answers so far"));
    if (session.steps.length === 0) {
      history.append(h("p", { class: "empty" }, "none yet"));
    } else {
      const ol = h("ol", { class: "timeline" });
      for (const step of session.steps) ol.append(h("li", {}, describeStep(step)));
      history.append(ol);
    }
    page.append(history);

    // transcript download: fetched on demand, offered as a self-contained link
    const dlBtn = h("button", { type: "button", class: "download" },
      "download transcript") as HTMLButtonElement;
    const dlSlot = h("span", { class: "download-slot" });
    dlBtn.addEventListener("click", async () => {
      dlBtn.disabled = true;
      try {
        const doc = await client.getTranscript(sid);
        const text = JSON.stringify(doc, null, 1);
        const a = h("a", {
          href: transcriptHref(text),
          download: `session-${sid}.json`,
        }, `session-${sid}.json`) as HTMLAnchorElement;
        dlSlot.replaceChildren(a);
        try {
          a.click(); // best effort; the link stays if the click is swallowed
        } catch {
          /* leave the link */
        }
      } catch (err) {
        errSlot.replaceChildren(errorBox(describeError(err)));
      } finally {
        dlBtn.disabled = false;
      }
    });
    page.append(h("section", { class: "transcript" }, dlBtn, " ", dlSlot));

    root.replaceChildren(page);

    if (session.status === "active") {
      // lazy polling so a second tab (or an operator on the phone) stays honest
      pollTimer = setTimeout(() => {
        if (gen === generation) void renderSession(gen, sid);
      }, POLL_MS);
    }
  }

  function suggestionPanel(sid: string, sug: Suggestion, errSlot: El): El {
    const panel = h("section", { class: "suggestion", "data-suggestion": "" });
    const options = sug.kind === "query-group"
      ? (sug.queries ?? [])
      : [{ query: sug.query ?? "", prob: 1.0 }];

    panel.append(h("h2", {}, sug.kind === "query-group"
      ? `suggested: query group ${sug.group}`
      : "suggested query"));
    panel.append(h("p", { class: "cost" }, `cost ${sug.cost.toFixed(4)}`));

    // the button set comes from the suggestion payload and nothing else, so an
    // off-suggestion answer is impossible to express in the UI
    const pickBox = h("div", { class: "options" });
    options.forEach((opt, i) => {
      const input = h("input", {
        type: "radio", name: "pick", value: opt.query, id: `pick-${opt.query}`,
      }) as HTMLInputElement;
      if (i === 0) input.checked = true;
      const label = h("label", { class: "option", for: `pick-${opt.query}` },
        input, ` ${opt.query} `);
      if (options.length > 1) label.append(h("span", { class: "weight" }, pct(opt.prob)));
      pickBox.append(label);
    });
    panel.append(pickBox);

    let response: 0 | 1 | null = null;
    const yes = h("button", { type: "button", "data-answer": "1" }, "yes") as HTMLButtonElement;
    const no = h("button", { type: "button", "data-answer": "0" }, "no") as HTMLButtonElement;
    const submit = h("button", { type: "button", class: "submit", disabled: "" },
      "submit answer") as HTMLButtonElement;
    function setResponse(r: 0 | 1) {
      response = r;
      yes.classList.toggle("selected", r === 1);
      no.classList.toggle("selected", r === 0);
      submit.disabled = false;
    }
    yes.addEventListener("click", () => setResponse(1));
    no.addEventListener("click", () => setResponse(0));
    panel.append(h("p", { class: "answer" }, yes, " ", no, " ", submit));

    submit.addEventListener("click", async () => {
      const picked = panel.querySelector<HTMLInputElement>("input[name=pick]:checked");
      if (!picked || response === null) return;
      submit.disabled = true;
      try {
        const next = await client.postAnswer(sid, picked.value, response);
        void renderSession(generation, sid, next);
      } catch (err) {
        if (err instanceof ApiError && err.status === 422 && err.detail &&
            typeof err.detail === "object" && "session" in err.detail) {
          const detail = err.detail as { message?: unknown; session: SessionResource };
          void renderSession(generation, sid, detail.session,
            detail.message ? String(detail.message) : undefined);
          return;
        }
        submit.disabled = false;
        errSlot.replaceChildren(errorBox(describeError(err)));
        if (err instanceof ApiError && err.status === 409) {
          // protocol drift (another tab answered?): refresh from the server
          void renderSession(generation, sid);
        }
      }
    });
    return panel;
  }

  // ---- routing -------------------------------------------------------------

  function route() {
    generation += 1;
    const sid = sessionIdFromHash(location.hash);
    if (sid) void renderSession(generation, sid);
    else void renderHome(generation);
  }

  const onHashChange = () => route();
  window.addEventListener("hashchange", onHashChange);
  route();

  return {
    dispose() {
      generation += 1;
      clearPoll();
      window.removeEventListener("hashchange", onHashChange);
    },
  };
}
