/**
 * TCP transport for Node: one JSON message per line. Used by the test
 * harness to drive a real server process; never imported by the browser
 * bundle.
 */

import * as net from "node:net";

import { Channel } from "./channel.js";
import { parseServerMessage, ServerMessage } from "./protocol.js";

export class TcpChannel implements Channel {
    private handlers: ((msg: ServerMessage) => void)[] = [];
    private buffer = "";

    constructor(private socket: net.Socket) {
        socket.setEncoding("utf8");
        socket.on("data", (chunk: string) => {
            this.buffer += chunk;
            let index;
            while ((index = this.buffer.indexOf("\n")) >= 0) {
                const line = this.buffer.slice(0, index).trim();
                this.buffer = this.buffer.slice(index + 1);
                if (!line) continue;
                const msg = parseServerMessage(line);
                for (const handler of this.handlers) handler(msg);
            }
        });
    }

    static connect(host: string, port: number): Promise<TcpChannel> {
        return new Promise((resolve, reject) => {
            const socket = net.createConnection({ host, port }, () =>
                resolve(new TcpChannel(socket)));
            socket.on("error", reject);
        });
    }

    send(msg: object): void {
        this.socket.write(JSON.stringify(msg) + "\n");
    }

    onMessage(handler: (msg: ServerMessage) => void): void {
        this.handlers.push(handler);
    }

    close(): void {
        this.socket.end();
        this.socket.destroy();
    }
}
