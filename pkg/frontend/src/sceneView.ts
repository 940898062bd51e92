/**
 * Top-down table rendering and pointer hit-testing. Rendered positions are
 * exactly the protocol frame positions; the view never simulates physics or
 * smooths motion on its own.
 */

import { FrameDoc, ObjectPoseDoc, Phase } from "./protocol.js";
import { TableBounds } from "./recorder.js";

export interface ViewTransform {
    /** pixels per scene unit */
    scale: number;
    /** canvas pixel coordinates of the scene origin */
    originX: number;
    originY: number;
}

export function worldToScreen(
    t: ViewTransform, x: number, y: number,
): { x: number; y: number } {
    // +y is north (up); canvas y grows downward
    return { x: t.originX + x * t.scale, y: t.originY - y * t.scale };
}

export function screenToWorld(
    t: ViewTransform, px: number, py: number,
): { x: number; y: number } {
    return { x: (px - t.originX) / t.scale, y: (t.originY - py) / t.scale };
}

/** Stable, id-derived block color. */
export function colorForId(id: string): string {
    if (id.includes("red")) return "hsl(4, 70%, 52%)";
    if (id.includes("green")) return "hsl(130, 55%, 40%)";
    if (id.includes("blue")) return "hsl(215, 70%, 50%)";
    let hash = 0;
    for (const ch of id) hash = (hash * 31 + ch.charCodeAt(0)) >>> 0;
    return `hsl(${hash % 360}, 60%, 45%)`;
}

export function hitTest(
    objects: ObjectPoseDoc[], wx: number, wy: number, halfSize: number,
): string | null {
    // topmost (last drawn) wins
    for (let i = objects.length - 1; i >= 0; i--) {
        const o = objects[i];
        if (Math.abs(wx - o.pos[0]) <= halfSize
                && Math.abs(wy - o.pos[1]) <= halfSize) {
            return o.id;
        }
    }
    return null;
}

export const PHASE_BANNERS: Record<Phase, string> = {
    recording: "Recording — drag blocks to demonstrate, then finish the demonstration",
    mining: "Mining patterns…",
    teaching: "Teaching — answer the questions",
    learned: "Concept learned — set up a scene and reenact",
    reenacting: "Reenacting…",
};

export class CanvasScene {
    frame: FrameDoc;
    phase: Phase = "recording";

    constructor(
        private ctx: CanvasRenderingContext2D,
        readonly transform: ViewTransform,
        readonly bounds: TableBounds,
        readonly blockSize: number,
        private descriptors: Record<string, string> = {},
        initial: FrameDoc = { t: 0, objects: [] },
    ) {
        this.frame = initial;
    }

    setFrame(frame: FrameDoc): void {
        this.frame = frame;
        this.draw();
    }

    setPhase(phase: Phase): void {
        this.phase = phase;
        this.draw();
    }

    pick(px: number, py: number): string | null {
        const w = screenToWorld(this.transform, px, py);
        return hitTest(this.frame.objects, w.x, w.y, this.blockSize / 2);
    }

    draw(): void {
        const { ctx } = this;
        const tl = worldToScreen(this.transform, this.bounds.xMin, this.bounds.yMax);
        const br = worldToScreen(this.transform, this.bounds.xMax, this.bounds.yMin);
        ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
        ctx.fillStyle = "#f4ead8";
        ctx.fillRect(tl.x, tl.y, br.x - tl.x, br.y - tl.y);
        ctx.strokeStyle = "#9a834f";
        ctx.strokeRect(tl.x, tl.y, br.x - tl.x, br.y - tl.y);

        const px = this.blockSize * this.transform.scale;
        for (const o of this.frame.objects) {
            const p = worldToScreen(this.transform, o.pos[0], o.pos[1]);
            ctx.save();
            ctx.translate(p.x, p.y);
            ctx.rotate((-(o.yaw ?? 0) * Math.PI) / 180);
            ctx.fillStyle = colorForId(o.id);
            ctx.fillRect(-px / 2, -px / 2, px, px);
            ctx.strokeStyle = "rgba(0,0,0,0.4)";
            ctx.strokeRect(-px / 2, -px / 2, px, px);
            ctx.restore();
            ctx.fillStyle = "#222";
            ctx.font = "11px sans-serif";
            ctx.textAlign = "center";
            ctx.fillText(this.descriptors[o.id] ?? o.id, p.x, p.y + px / 2 + 12);
        }

        ctx.fillStyle = "#333";
        ctx.font = "13px sans-serif";
        ctx.textAlign = "left";
        ctx.fillText(PHASE_BANNERS[this.phase], 8, 16);
    }
}
