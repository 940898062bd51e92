/**
 * Transport abstraction: the client logic only ever sees a Channel, so the
 * browser build uses WebSocket while the Node test harness speaks
 * newline-delimited JSON over TCP (see nodeChannel.ts). Identical messages
 * either way.
 */

import { parseServerMessage, ServerMessage } from "./protocol.js";

export interface Channel {
    send(msg: object): void;
    onMessage(handler: (msg: ServerMessage) => void): void;
    onClose?(handler: () => void): void;
    close(): void;
}

export class WebSocketChannel implements Channel {
    private handlers: ((msg: ServerMessage) => void)[] = [];
    private closeHandlers: (() => void)[] = [];

    constructor(private ws: WebSocket) {
        ws.addEventListener("message", (event: MessageEvent) => {
            const msg = parseServerMessage(String(event.data));
            for (const handler of this.handlers) handler(msg);
        });
        ws.addEventListener("close", () => {
            for (const handler of this.closeHandlers) handler();
        });
    }

    onClose(handler: () => void): void {
        this.closeHandlers.push(handler);
    }

    static connect(url: string): Promise<WebSocketChannel> {
        return new Promise((resolve, reject) => {
            const ws = new WebSocket(url);
            ws.addEventListener("open", () => resolve(new WebSocketChannel(ws)));
            ws.addEventListener("error", () =>
                reject(new Error(`cannot connect to ${url}`)));
        });
    }

    send(msg: object): void {
        this.ws.send(JSON.stringify(msg));
    }

    onMessage(handler: (msg: ServerMessage) => void): void {
        this.handlers.push(handler);
    }

    close(): void {
        this.ws.close();
    }
}

/** In-memory channel for unit tests. */
export class FakeChannel implements Channel {
    sent: object[] = [];
    private handlers: ((msg: ServerMessage) => void)[] = [];

    send(msg: object): void {
        this.sent.push(msg);
    }

    onMessage(handler: (msg: ServerMessage) => void): void {
        this.handlers.push(handler);
    }

    deliver(msg: ServerMessage): void {
        for (const handler of this.handlers) handler(msg);
    }

    close(): void {}
}
