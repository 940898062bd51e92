/**
 * Question panel state machine. At most one active question; yes/no input
 * is locked while an answer is in flight; the scrollback mirrors the
 * server's queue snapshots, so skipped (implied) questions appear with
 * their statuses and denied/implied-false entries can be struck through.
 */

import {
    ConceptLearned,
    ErrorMessage,
    QuestionMessage,
    QueueEntry,
} from "./protocol.js";

export interface PanelState {
    active: QuestionMessage | null;
    awaiting: boolean;
    scrollback: QueueEntry[];
    confirmedSummary: string[];
    errorBanner: string | null;
    done: boolean;
}

const RESOLVED = new Set(["confirmed", "denied", "implied_true", "implied_false"]);

export function struckThrough(entry: QueueEntry): boolean {
    return entry.status === "denied" || entry.status === "implied_false";
}

export class QuestionPanel {
    state: PanelState = {
        active: null,
        awaiting: false,
        scrollback: [],
        confirmedSummary: [],
        errorBanner: null,
        done: false,
    };

    constructor(private onChange: (state: PanelState) => void = () => {}) {}

    private emit(): void {
        this.onChange(this.state);
    }

    /** The question text shown must be the server's text, byte for byte. */
    showQuestion(msg: QuestionMessage): void {
        this.state.active = msg;
        this.state.awaiting = false;
        this.state.scrollback = msg.queue.filter((e) => RESOLVED.has(e.status));
        this.emit();
    }

    get buttonsEnabled(): boolean {
        return this.state.active !== null && !this.state.awaiting;
    }

    /** Returns the answer to send, locking the buttons until the reply. */
    answer(value: "yes" | "no"): { id: string; answer: "yes" | "no" } {
        if (!this.buttonsEnabled || this.state.active === null) {
            throw new Error("no active question to answer");
        }
        const id = this.state.active.id;
        this.state.awaiting = true;
        this.emit();
        return { id, answer: value };
    }

    conceptLearned(msg: ConceptLearned): void {
        this.state.active = null;
        this.state.awaiting = false;
        this.state.done = true;
        if (msg.queue) {
            this.state.scrollback = msg.queue.filter((e) => RESOLVED.has(e.status));
            this.state.confirmedSummary = msg.queue
                .filter((e) => e.status === "confirmed")
                .map((e) => e.text);
        } else {
            this.state.confirmedSummary = msg.concept.confirmed;
        }
        this.emit();
    }

    showError(msg: ErrorMessage): void {
        // server errors are surfaced verbatim
        this.state.errorBanner = `${msg.rule}: ${msg.detail}`;
        this.state.awaiting = false;
        this.emit();
    }
}
