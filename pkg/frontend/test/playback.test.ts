import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { PlaybackBuffer, PlaybackView } from "../src/playback.js";
import { PlanDone, PlanFrame } from "../src/protocol.js";

function frame(index: number, seq: number, ok = true): PlanFrame {
    return {
        proto: 1, type: "plan_frame", seq, session: "s001",
        index,
        frame: { t: index, objects: [] },
        audit: index === 0 ? {} : { "forall_t MV(A)[t] = 1": ok },
    };
}

function done(seq: number, ok = true): PlanDone {
    return {
        proto: 1, type: "plan_done", seq, session: "s001",
        steps: 3,
        audit: {
            during: [{ "forall_t MV(A)[t] = 1": ok }],
            terminal: { "CD(A,B)[0] = CD(A,B)[F]": ok },
            progress_revolutions: 1.0,
            expansions: 10,
        },
        trace: { frames: [] },
    };
}

describe("PlaybackBuffer", () => {
    beforeEach(() => vi.useFakeTimers());
    afterEach(() => vi.useRealTimers());

    it("renders frames in order at the configured rate", () => {
        const rendered: number[] = [];
        const buffer = new PlaybackBuffer(
            (v) => rendered.push(v.frame.index), () => {}, 50);
        for (let i = 0; i < 4; i++) buffer.push(frame(i, i + 1));
        vi.advanceTimersByTime(49);
        expect(rendered).toEqual([]);
        vi.advanceTimersByTime(1);
        expect(rendered).toEqual([0]);
        vi.advanceTimersByTime(150);
        expect(rendered).toEqual([0, 1, 2, 3]);
    });

    it("loses no frames when the rate changes mid-playback", () => {
        const rendered: number[] = [];
        const buffer = new PlaybackBuffer(
            (v) => rendered.push(v.frame.index), () => {}, 100);
        for (let i = 0; i < 6; i++) buffer.push(frame(i, i + 1));
        vi.advanceTimersByTime(100);
        expect(rendered).toEqual([0]);
        buffer.setFrameMs(10);
        vi.advanceTimersByTime(1000);
        expect(rendered).toEqual([0, 1, 2, 3, 4, 5]);
    });

    it("exposes audit badges per frame", () => {
        const views: PlaybackView[] = [];
        const buffer = new PlaybackBuffer((v) => views.push(v), () => {}, 10);
        buffer.push(frame(1, 1, false));
        vi.advanceTimersByTime(10);
        expect(views[0].badges).toEqual(
            [{ pattern: "forall_t MV(A)[t] = 1", ok: false }]);
    });

    it("reports completion only after the last frame rendered", () => {
        const rendered: number[] = [];
        let finished: boolean | null = null;
        const buffer = new PlaybackBuffer(
            (v) => rendered.push(v.frame.index),
            (_msg, allGreen) => { finished = allGreen; }, 20);
        buffer.push(frame(0, 1));
        buffer.push(frame(1, 2));
        buffer.done(done(3));
        vi.advanceTimersByTime(20);
        expect(finished).toBeNull();
        vi.advanceTimersByTime(20);
        expect(rendered).toEqual([0, 1]);
        expect(finished).toBe(true);
    });

    it("flags violated audits on completion", () => {
        let finished: boolean | null = null;
        const buffer = new PlaybackBuffer(
            () => {}, (_msg, allGreen) => { finished = allGreen; }, 10);
        buffer.done(done(1, false));
        expect(finished).toBe(false);
    });
});
