// Command console: an input line with shell-style history plus a log of
// what the server answered.

/** Up/down history over submitted lines, newest last. */
export class CommandHistory {
  private entries: string[] = [];
  private cursor = -1; // -1 means "past the end", i.e. a fresh line

  push(line: string): void {
    if (line.trim() === "") return;
    if (this.entries[this.entries.length - 1] !== line) {
      this.entries.push(line);
    }
    this.cursor = -1;
  }

  /** Step back in time; returns the line to show, or null at the oldest. */
  previous(): string | null {
    if (this.entries.length === 0) return null;
    if (this.cursor === -1) {
      this.cursor = this.entries.length - 1;
    } else if (this.cursor > 0) {
      this.cursor -= 1;
    }
    return this.entries[this.cursor];
  }

  /** Step forward; returns the line to show, or null back at the fresh line. */
  next(): string | null {
    if (this.cursor === -1) return null;
    this.cursor += 1;
    if (this.cursor >= this.entries.length) {
      this.cursor = -1;
      return null;
    }
    return this.entries[this.cursor];
  }

  get size(): number {
    return this.entries.length;
  }
}

export type LogKind = "sent" | "error" | "info";

export interface ConsoleElements {
  input: HTMLInputElement;
  log: HTMLElement;
}

export class CommandConsole {
  readonly history = new CommandHistory();

  constructor(
    private readonly elements: ConsoleElements,
    private readonly submit: (text: string) => void,
  ) {
    elements.input.addEventListener("keydown", (event) => this.onKey(event));
  }

  append(kind: LogKind, text: string): void {
    const line = document.createElement("div");
    line.className = `console-line console-${kind}`;
    line.textContent = text;
    this.elements.log.appendChild(line);
    while (this.elements.log.childElementCount > 200) {
      this.elements.log.firstElementChild?.remove();
    }
    this.elements.log.scrollTop = this.elements.log.scrollHeight;
  }

  private onKey(event: KeyboardEvent): void {
    const input = this.elements.input;
    if (event.key === "Enter") {
      const text = input.value.trim();
      if (text !== "") {
        this.history.push(text);
        this.append("sent", `> ${text}`);
        this.submit(text);
      }
      input.value = "";
    } else if (event.key === "ArrowUp") {
      const line = this.history.previous();
      if (line !== null) {
        input.value = line;
        event.preventDefault();
      }
    } else if (event.key === "ArrowDown") {
      input.value = this.history.next() ?? "";
      event.preventDefault();
    }
  }
}
