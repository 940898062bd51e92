/**
 * Reenactment playback: buffers plan frames as they stream in and renders
 * them on a client-side clock, so changing the rate mid-playback never
 * drops a frame. Each rendered frame carries its constraint-audit badges.
 */

import { PlanDone, PlanFrame } from "./protocol.js";

export interface AuditBadge {
    pattern: string;
    ok: boolean;
}

export interface PlaybackView {
    frame: PlanFrame;
    badges: AuditBadge[];
}

export class PlaybackBuffer {
    private queue: PlanFrame[] = [];
    private timer: ReturnType<typeof setTimeout> | null = null;
    private finished: PlanDone | null = null;
    rendered = 0;

    constructor(
        private render: (view: PlaybackView) => void,
        private onDone: (msg: PlanDone, allGreen: boolean) => void,
        private frameMs = 50,
    ) {}

    /** Change the playback rate; takes effect from the next frame. */
    setFrameMs(ms: number): void {
        this.frameMs = Math.max(1, ms);
    }

    push(frame: PlanFrame): void {
        this.queue.push(frame);
        this.schedule();
    }

    done(msg: PlanDone): void {
        this.finished = msg;
        this.schedule();
    }

    private schedule(): void {
        if (this.timer !== null) return;
        if (this.queue.length === 0) {
            this.maybeFinish();
            return;
        }
        this.timer = setTimeout(() => {
            this.timer = null;
            const frame = this.queue.shift()!;
            this.rendered += 1;
            this.render({
                frame,
                badges: Object.entries(frame.audit).map(
                    ([pattern, ok]) => ({ pattern, ok })),
            });
            this.schedule();
        }, this.frameMs);
    }

    private maybeFinish(): void {
        if (this.finished === null) return;
        const msg = this.finished;
        this.finished = null;
        const during = msg.audit.during.every(
            (row) => Object.values(row).every(Boolean));
        const terminal = Object.values(msg.audit.terminal).every(Boolean);
        this.onDone(msg, during && terminal);
    }
}
