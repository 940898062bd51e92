/**
 * Demonstration recorder: turns raw pointer paths into demo frames at a
 * fixed rate. Pointer events arrive at whatever rate the device produces;
 * the recorder snapshots the whole scene every `period` seconds (20 fps by
 * default) so the server sees stable demonstrations regardless of the
 * pointer hardware. Finishing a drag does not finish the demonstration:
 * several drags (of the same or different blocks) accumulate until
 * finish() is called.
 */

import { FrameDoc, ObjectPoseDoc } from "./protocol.js";

export interface PointerSample {
    /** seconds since the drag started */
    t: number;
    x: number;
    y: number;
}

export interface TableBounds {
    xMin: number;
    xMax: number;
    yMin: number;
    yMax: number;
}

export interface DragResult {
    frames: FrameDoc[];
    /** true when some sample had to be clamped into the table bounds */
    clamped: boolean;
}

export const DEFAULT_FRAME_PERIOD = 1 / 20;

export function clampToBounds(
    x: number, y: number, bounds: TableBounds,
): { x: number; y: number; clamped: boolean } {
    const cx = Math.min(Math.max(x, bounds.xMin), bounds.xMax);
    const cy = Math.min(Math.max(y, bounds.yMin), bounds.yMax);
    return { x: cx, y: cy, clamped: cx !== x || cy !== y };
}

/**
 * Downsample a pointer path to tick times k * period, taking the latest
 * sample at or before each tick (deterministic for a given path).
 */
export function downsamplePath(
    samples: PointerSample[], period: number,
): PointerSample[] {
    if (samples.length === 0) return [];
    const out: PointerSample[] = [];
    const end = samples[samples.length - 1].t;
    let i = 0;
    for (let k = 0; ; k++) {
        const t = k * period;
        if (t > end + 1e-9) break;
        while (i + 1 < samples.length && samples[i + 1].t <= t + 1e-9) i++;
        out.push({ t, x: samples[i].x, y: samples[i].y });
    }
    return out;
}

export class DragRecorder {
    private positions = new Map<string, { x: number; y: number; yaw: number }>();
    private frames: FrameDoc[] = [];
    private tick = 0;

    constructor(
        readonly period: number = DEFAULT_FRAME_PERIOD,
        readonly bounds: TableBounds | null = null,
    ) {}

    /** Reset to a fresh demonstration over the given scene. */
    begin(scene: ObjectPoseDoc[]): void {
        this.positions = new Map(scene.map((o) =>
            [o.id, { x: o.pos[0], y: o.pos[1], yaw: o.yaw ?? 0 }]));
        this.frames = [];
        this.tick = 0;
        this.snapshot(); // the starting arrangement is frame 0
    }

    private snapshot(): void {
        const objects: ObjectPoseDoc[] = [...this.positions.entries()].map(
            ([id, p]) => ({ id, pos: [p.x, p.y], yaw: p.yaw }));
        this.frames.push({ t: this.tick * this.period, objects });
        this.tick += 1;
    }

    /** Record one drag of one block along a pointer path. */
    drag(blockId: string, samples: PointerSample[]): DragResult {
        if (!this.positions.has(blockId)) {
            throw new Error(`unknown block ${blockId}`);
        }
        let clamped = false;
        const first = this.frames.length;
        for (const sample of downsamplePath(samples, this.period)) {
            let { x, y } = sample;
            if (this.bounds) {
                const c = clampToBounds(x, y, this.bounds);
                x = c.x;
                y = c.y;
                clamped = clamped || c.clamped;
            }
            const prev = this.positions.get(blockId)!;
            this.positions.set(blockId, { x, y, yaw: prev.yaw });
            this.snapshot();
        }
        return { frames: this.frames.slice(first), clamped };
    }

    /** All frames recorded so far (frame 0 is the initial arrangement). */
    finish(): FrameDoc[] {
        return this.frames.slice();
    }

    get frameCount(): number {
        return this.frames.length;
    }
}
