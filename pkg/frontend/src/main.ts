// The operator console page: connects the WebSocket link, the input
// sources, and the 3D scene, and keeps the HUD in sync with the store.

import { Ack, SkeletonFrame, StreamDecoder } from "./codec.js";
import {
  GAMEPAD_INTERVAL_MS,
  KeyState,
  MIN_SEND_INTERVAL_MS,
  RateLimiter,
  VirtualSuit,
  emptyKeys,
  padSnapshot,
} from "./input.js";
import { ModelDocument } from "./model.js";
import { ConsoleLink } from "./net.js";
import { ConsoleScene, ScenarioView } from "./scene.js";
import { synthesizeFrame } from "./skeleton.js";
import { ConsoleStore, InputMode } from "./store.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function fetchJson<T>(path: string): Promise<T> {
  const res = await fetch(path);
  if (!res.ok) {
    throw new Error(`${path} responded ${res.status}`);
  }
  return (await res.json()) as T;
}

interface ReplayState {
  frames: SkeletonFrame[];
  index: number;
  startedAtMs: number;
  baseStamp: number;
}

async function boot(): Promise<void> {
  const store = new ConsoleStore();
  const suit = new VirtualSuit();
  const keys: KeyState = emptyKeys();
  const sendLimiter = new RateLimiter(MIN_SEND_INTERVAL_MS);
  const padLimiter = new RateLimiter(GAMEPAD_INTERVAL_MS);
  let replay: ReplayState | null = null;

  const model = await fetchJson<ModelDocument>("/api/model");
  const canvas = el<HTMLCanvasElement>("view");
  const scene = new ConsoleScene(canvas, model);

  const params = new URLSearchParams(window.location.search);
  const wanted = params.get("scenario") ?? "";
  try {
    const infos = await fetchJson<{ id: string }[]>("/api/scenarios");
    const list = infos.map((s) => s.id);
    const select = el<HTMLSelectElement>("scenario");
    for (const name of ["", ...list]) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name === "" ? "(no scenario overlay)" : name;
      select.appendChild(option);
    }
    select.value = list.includes(wanted) ? wanted : "";
    select.onchange = () => {
      params.set("scenario", select.value);
      window.location.search = params.toString();
    };
    if (select.value !== "") {
      const view = await fetchJson<ScenarioView>(`/api/scenarios/${select.value}`);
      scene.addScenario(view);
    }
  } catch {
    // scenario overlay is optional; the robot view works without it
  }

  const wsUrl = `${window.location.protocol === "https:" ? "wss" : "ws"}://${window.location.host}/ws`;
  const link = new ConsoleLink(wsUrl, {
    onMessage: (message) => store.absorb(message),
    onState: (state) => {
      store.connection = state;
      el("connection").textContent = state;
      el("connection").className = `badge ${state}`;
      el("banner").style.display = state === "open" ? "none" : "block";
    },
  });
  link.start();

  const modeInputs = Array.from(
    document.querySelectorAll<HTMLInputElement>("input[name=mode]"),
  );
  const setMode = (mode: InputMode) => {
    store.mode = mode;
    el("suit-help").style.display = mode === "virtual-suit" ? "block" : "none";
    el("replay-row").style.display = mode === "replay" ? "block" : "none";
  };
  for (const input of modeInputs) {
    input.onchange = () => {
      if (input.checked) {
        setMode(input.value as InputMode);
      }
    };
  }

  // keyboard for the virtual suit
  const RPY_KEYS: Record<string, [number, number]> = {
    Digit1: [0, -1],
    Digit2: [0, 1],
    Digit3: [1, -1],
    Digit4: [1, 1],
    Digit5: [2, -1],
    Digit6: [2, 1],
  };
  const wristRpy: [number, number, number] = [0, 0, 0];
  const keyMap: Record<string, keyof KeyState> = {
    KeyW: "forward",
    KeyS: "back",
    KeyA: "left",
    KeyD: "right",
    KeyQ: "yawLeft",
    KeyE: "yawRight",
    KeyF: "leftClose",
    KeyJ: "rightClose",
  };
  window.addEventListener("keydown", (ev) => {
    const flag = keyMap[ev.code];
    if (flag !== undefined) {
      keys[flag] = true;
      ev.preventDefault();
      return;
    }
    if (ev.code === "KeyC") {
      keys.leftHigh = !keys.leftHigh;
    } else if (ev.code === "KeyV") {
      keys.rightLow = !keys.rightLow;
    } else if (ev.code === "Space") {
      keys.leftClose = false;
      keys.rightClose = false;
      suit.releaseAll();
      ev.preventDefault();
    } else if (ev.code in RPY_KEYS) {
      const [axis, sign] = RPY_KEYS[ev.code];
      wristRpy[axis] += sign * 0.05;
      suit.setWristRpy(wristRpy[0], wristRpy[1], wristRpy[2]);
    }
  });
  window.addEventListener("keyup", (ev) => {
    const flag = keyMap[ev.code];
    if (flag !== undefined) {
      keys[flag] = false;
    }
  });

  // draggable wrist marker: pad x is reach x, pad y is height z
  const pad = el<HTMLDivElement>("wrist-pad");
  const knob = el<HTMLDivElement>("wrist-knob");
  const PAD_SPAN_M = 0.3;
  let dragging = false;
  const applyPad = (clientX: number, clientY: number) => {
    const rect = pad.getBoundingClientRect();
    const nx = Math.min(1, Math.max(-1, ((clientX - rect.left) / rect.width) * 2 - 1));
    const ny = Math.min(1, Math.max(-1, ((clientY - rect.top) / rect.height) * 2 - 1));
    knob.style.left = `${(nx * 0.5 + 0.5) * 100}%`;
    knob.style.top = `${(ny * 0.5 + 0.5) * 100}%`;
    suit.setWristOffset(nx * PAD_SPAN_M, 0, -ny * PAD_SPAN_M);
  };
  pad.addEventListener("pointerdown", (ev) => {
    dragging = true;
    pad.setPointerCapture(ev.pointerId);
    applyPad(ev.clientX, ev.clientY);
  });
  pad.addEventListener("pointermove", (ev) => {
    if (dragging) {
      applyPad(ev.clientX, ev.clientY);
    }
  });
  pad.addEventListener("pointerup", () => {
    dragging = false;
  });

  // replay: a recorded .skel file played back on its own timestamps
  el<HTMLInputElement>("replay-file").onchange = async (ev) => {
    const input = ev.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file === undefined) {
      return;
    }
    const decoder = new StreamDecoder();
    const frames = decoder
      .feed(new Uint8Array(await file.arrayBuffer()))
      .filter((m): m is SkeletonFrame => m.kind === "skeleton");
    if (frames.length === 0) {
      el("replay-info").textContent = "no skeleton frames in that file";
      return;
    }
    replay = {
      frames,
      index: 0,
      startedAtMs: performance.now(),
      baseStamp: frames[0].timestamp,
    };
    el("replay-info").textContent = `${frames.length} frames loaded`;
  };

  el("timer-reset").onclick = () => store.resetTimer();

  // gamepad sampling at its own cadence
  let padSeen = false;
  setInterval(() => {
    if (store.mode !== "gamepad") {
      return;
    }
    const pads = navigator.getGamepads ? navigator.getGamepads() : [];
    const device = pads.find((p) => p !== null) ?? null;
    if (device === null) {
      el("gamepad-note").textContent = "no gamepad detected; press a button on the device";
      return;
    }
    padSeen = true;
    el("gamepad-note").textContent = `using ${device.id}`;
    if (padLimiter.tryAcquire()) {
      link.send(padSnapshot(device, performance.now() / 1000));
    }
  }, GAMEPAD_INTERVAL_MS);

  let lastTick = performance.now();
  const frame = () => {
    const now = performance.now();
    const dt = Math.min(0.1, (now - lastTick) / 1000);
    lastTick = now;

    if (store.mode === "virtual-suit") {
      suit.step(dt, keys);
      if (link.isOpen && sendLimiter.tryAcquire()) {
        link.send(synthesizeFrame(now / 1000, suit.gesture));
      }
    } else if (store.mode === "replay" && replay !== null) {
      const elapsed = (now - replay.startedAtMs) / 1000;
      while (
        replay.index < replay.frames.length &&
        replay.frames[replay.index].timestamp - replay.baseStamp <= elapsed
      ) {
        if (sendLimiter.tryAcquire()) {
          link.send(replay.frames[replay.index]);
          replay.index++;
        } else {
          break;
        }
      }
      el("replay-info").textContent =
        replay.index >= replay.frames.length
          ? "replay finished"
          : `frame ${replay.index} / ${replay.frames.length}`;
    }

    const fresh = store.takeFreshState();
    if (fresh !== null) {
      scene.applyState(fresh);
    }
    if (store.lastCloud !== null) {
      scene.applyCloud(store.lastCloud);
      store.lastCloud = null;
    }
    scene.render();
    hud(store, padSeen);
    requestAnimationFrame(frame);
  };

  const fit = () => {
    const rect = canvas.parentElement!.getBoundingClientRect();
    scene.resize(rect.width, rect.height);
  };
  window.addEventListener("resize", fit);
  fit();
  requestAnimationFrame(frame);

  // echo heartbeats so the server-side peer sees a live client
  setInterval(() => {
    if (link.isOpen) {
      const beat: Ack = { kind: "ack", timestamp: performance.now() / 1000, code: 0 };
      link.send(beat);
    }
  }, 500);
}

function hud(store: ConsoleStore, padSeen: boolean): void {
  const t = store.triggers;
  light("trig-gripper", t.gripper);
  light("trig-walking", t.walking);
  light("trig-arm", t.arm);
  light("trig-homing", t.homing);
  el("timer").textContent = store.taskTimerS().toFixed(1);
  el("rates").textContent =
    `${store.stateRate.perSecond()} states/s, ${store.renderRate.perSecond()} draws/s`;
  el("robot-status").textContent = store.statusLabel();
  const sim = store.lastState;
  el("sim-time").textContent = sim === null ? "-" : sim.timestamp.toFixed(2);
  if (store.mode !== "gamepad" && !padSeen) {
    el("gamepad-note").textContent = "";
  }
}

function light(id: string, on: boolean): void {
  el(id).className = `light ${on ? "on" : "off"}`;
}

boot().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner !== null) {
    banner.style.display = "block";
    banner.textContent = `console failed to start: ${err}`;
  }
});
