// Console state shared between the network layer, the input sources, and
// the renderer: connection status, the latest telemetry of each kind,
// trigger indicator bits, the task timer, and throughput meters.

import {
  Ack,
  PointCloud,
  RobotState,
  TRIGGER_ARM,
  TRIGGER_GRIPPER,
  TRIGGER_HOMING,
  TRIGGER_WALKING,
  WireMessage,
} from "./codec.js";
import { Clock } from "./input.js";

export type ConnectionState = "connecting" | "open" | "closed";
export type InputMode = "virtual-suit" | "gamepad" | "replay";

export interface TriggerIndicators {
  gripper: boolean;
  walking: boolean;
  arm: boolean;
  homing: boolean;
}

export function triggersOf(mask: number): TriggerIndicators {
  return {
    gripper: (mask & TRIGGER_GRIPPER) !== 0,
    walking: (mask & TRIGGER_WALKING) !== 0,
    arm: (mask & TRIGGER_ARM) !== 0,
    homing: (mask & TRIGGER_HOMING) !== 0,
  };
}

// Counts events over a sliding one-second window.
export class RateMeter {
  private stamps: number[] = [];

  constructor(private clock: Clock = () => performance.now()) {}

  mark(): void {
    const now = this.clock();
    this.stamps.push(now);
    this.trim(now);
  }

  perSecond(): number {
    this.trim(this.clock());
    return this.stamps.length;
  }

  private trim(now: number): void {
    const cutoff = now - 1000;
    let drop = 0;
    while (drop < this.stamps.length && this.stamps[drop] < cutoff) {
      drop++;
    }
    if (drop > 0) {
      this.stamps.splice(0, drop);
    }
  }
}

export class ConsoleStore {
  connection: ConnectionState = "closed";
  mode: InputMode = "virtual-suit";
  lastState: RobotState | null = null;
  lastCloud: PointCloud | null = null;
  lastAck: Ack | null = null;
  triggers: TriggerIndicators = triggersOf(0);
  stateRate: RateMeter;
  renderRate: RateMeter;
  private timerStart: number | null = null;
  private renderedStamp = -1;

  constructor(private clock: Clock = () => performance.now()) {
    this.stateRate = new RateMeter(clock);
    this.renderRate = new RateMeter(clock);
  }

  absorb(message: WireMessage): void {
    switch (message.kind) {
      case "robot_state":
        this.lastState = message;
        this.triggers = triggersOf(message.triggerMask);
        this.stateRate.mark();
        if (this.timerStart === null) {
          this.timerStart = this.clock();
        }
        break;
      case "point_cloud":
        this.lastCloud = message;
        break;
      case "ack":
        this.lastAck = message;
        break;
      default:
        break;
    }
  }

  // The renderer calls this once per animation frame; it reports a render
  // update only when a state newer than the last drawn one is available,
  // which is what the updates-per-second meter counts.
  takeFreshState(): RobotState | null {
    const state = this.lastState;
    if (state === null || state.timestamp === this.renderedStamp) {
      return null;
    }
    this.renderedStamp = state.timestamp;
    this.renderRate.mark();
    return state;
  }

  resetTimer(): void {
    this.timerStart = this.clock();
  }

  taskTimerS(): number {
    if (this.timerStart === null) {
      return 0;
    }
    return (this.clock() - this.timerStart) / 1000;
  }

  statusLabel(): string {
    const st = this.lastState;
    if (st === null) {
      return "no telemetry";
    }
    return ["ok", "degraded", "fault"][st.status] ?? `status ${st.status}`;
  }
}
