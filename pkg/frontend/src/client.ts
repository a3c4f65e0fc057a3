// Transport-agnostic session controller: owns the UiState, feeds raw frames
// through the reducer, and guards outbound input (locked while flashing).
// main.ts binds it to a browser WebSocket; tests bind it to a scripted stub.

import {
  attendFrame,
  byeFrame,
  encodeFrame,
  functionFrame,
  helloFrame,
  type ClientFrame,
  type FunctionName,
} from "./protocol.js";
import { parseServerFrame } from "./protocol.js";
import { applyFrame, initialState, markDisconnected, type UiState } from "./state.js";

export interface Transport {
  send(raw: string): void;
  close(): void;
}

export class SpellerClient {
  state: UiState = initialState();
  private listeners: Array<(state: UiState) => void> = [];

  constructor(private transport: Transport) {}

  onChange(listener: (state: UiState) => void): void {
    this.listeners.push(listener);
  }

  private setState(state: UiState): void {
    this.state = state;
    for (const listener of this.listeners) listener(state);
  }

  private sendFrame(frame: ClientFrame): void {
    this.transport.send(encodeFrame(frame));
  }

  /** Open the session; the server answers hello/config/compose/suggestions. */
  connect(session?: string): void {
    this.sendFrame(helloFrame(session));
  }

  /** Feed one raw server message through the reducer. */
  handleRaw(raw: string): void {
    const frame = parseServerFrame(raw);
    this.setState(applyFrame(this.state, frame));
  }

  handleClosed(): void {
    this.setState(markDisconnected(this.state));
  }

  private get inputLocked(): boolean {
    return this.state.flashing || this.state.connection !== "open";
  }

  /** Designate the key to attend next trial.  Rejected while flashing. */
  attend(label: string): boolean {
    if (this.inputLocked || this.state.finished) return false;
    this.sendFrame(attendFrame(label));
    return true;
  }

  /** Run one selection with the currently attended key. */
  startTrial(): boolean {
    if (this.inputLocked || this.state.attended === null || this.state.paused) {
      return false;
    }
    this.sendFrame(functionFrame("start_trial"));
    return true;
  }

  sendFunction(name: FunctionName, value?: number): boolean {
    if (this.inputLocked) return false;
    this.sendFrame(functionFrame(name, value));
    return true;
  }

  disconnect(): void {
    this.sendFrame(byeFrame());
    this.transport.close();
  }
}
