// Pointer-clutch input: hold the pointer down to clutch in, drag to move.
// Screen displacement maps to planar position through the camera's px/m
// scale (100 px right at 100 px/m is +1.0 m), and a twist gesture (mouse
// wheel, or Q/E while dragging) adds yaw. While the pointer is held the
// pose is re-emitted every display frame even without motion, which is what
// keeps the service watchdog fed during a steady hold.

import { ClutchMsg, PoseMsg, planarPose } from "./messages.js";

export interface InputSink {
  canSend(): boolean;
  sendClutch(msg: ClutchMsg): boolean;
  sendPose(msg: PoseMsg): boolean;
  warn(text: string): void;
}

export class PointerClutch {
  private dragging = false;
  private startPxX = 0;
  private startPxY = 0;
  private lastPxX = 0;
  private lastPxY = 0;
  private yaw = 0;
  private lastTMs = 0;

  constructor(
    private readonly sink: InputSink,
    private readonly pxPerM: () => number,
    private readonly now: () => number = () => performance.now(),
  ) {}

  isDragging(): boolean {
    return this.dragging;
  }

  pointerDown(pxX: number, pxY: number): void {
    if (this.dragging) {
      return;
    }
    if (!this.sink.canSend()) {
      this.sink.warn("not connected; clutch input suppressed");
      return;
    }
    this.dragging = true;
    this.startPxX = pxX;
    this.startPxY = pxY;
    this.lastPxX = pxX;
    this.lastPxY = pxY;
    this.yaw = 0;
    this.sink.sendClutch({ type: "clutch", engaged: true });
    this.emitPose();
  }

  pointerMove(pxX: number, pxY: number): void {
    if (!this.dragging) {
      return;
    }
    this.lastPxX = pxX;
    this.lastPxY = pxY;
  }

  pointerUp(): void {
    if (!this.dragging) {
      return;
    }
    this.dragging = false;
    this.sink.sendClutch({ type: "clutch", engaged: false });
  }

  // Twist gesture while clutched; positive is counter-clockwise.
  twistBy(rad: number): void {
    if (!this.dragging) {
      return;
    }
    this.yaw += rad;
  }

  // Called once per display frame by the render loop.
  tick(): void {
    if (!this.dragging) {
      return;
    }
    if (!this.sink.canSend()) {
      // Connection dropped mid-drag: stop streaming and let the service
      // watchdog bring the base to rest.
      this.dragging = false;
      this.sink.warn("connection lost during drag; clutch released");
      return;
    }
    this.emitPose();
  }

  // Current device pose implied by the drag, in metres and radians. The
  // `+ 0` folds negative zero back to zero so the in-memory value matches
  // its JSON encoding.
  currentPose(): [number, number, number] {
    const scale = this.pxPerM();
    const x = (this.lastPxX - this.startPxX) / scale;
    const y = -(this.lastPxY - this.startPxY) / scale + 0; // screen y grows downward
    return [x, y, this.yaw];
  }

  private emitPose(): void {
    const [x, y, yaw] = this.currentPose();
    this.sink.sendPose(planarPose(this.nextTMs(), x, y, yaw));
  }

  // Strictly increasing integer clock, even when frames land inside the
  // same millisecond.
  private nextTMs(): number {
    const t = Math.max(Math.floor(this.now()), this.lastTMs + 1);
    this.lastTMs = t;
    return t;
  }
}
