/** On-screen hiragana keyboard model for composing answers.
 *
 * Layout follows the board's gojuon column order so the answerer can find
 * keys where they sit on the physical board. Pure model: the DOM layer only
 * renders `rows()` and forwards key presses.
 */

import type { BoardReplica } from "./protocol.js";

export const GOJUON_ROWS: string[][] = [
  ["あ", "い", "う", "え", "お"],
  ["か", "き", "く", "け", "こ"],
  ["さ", "し", "す", "せ", "そ"],
  ["た", "ち", "つ", "て", "と"],
  ["な", "に", "ぬ", "ね", "の"],
  ["は", "ひ", "ふ", "へ", "ほ"],
  ["ま", "み", "む", "め", "も"],
  ["や", "ゆ", "よ"],
  ["ら", "り", "る", "れ", "ろ"],
  ["わ", "を", "ん"],
];

export class KeyboardModel {
  private buffer: string[] = [];
  private readonly layout: string[][];

  constructor(board?: BoardReplica | null) {
    if (board) {
      // group board cells into keyboard rows by column (gojuon columns run
      // down the board), preserving row order inside each column
      const byCol = new Map<number, { row: number; glyph: string }[]>();
      for (const cell of board.cells) {
        const col = byCol.get(cell.col) ?? [];
        col.push({ row: cell.row, glyph: cell.glyph });
        byCol.set(cell.col, col);
      }
      this.layout = [...byCol.entries()]
        .sort((a, b) => a[0] - b[0])
        .map(([, cells]) =>
          cells.sort((a, b) => a.row - b.row).map((c) => c.glyph),
        );
    } else {
      this.layout = GOJUON_ROWS;
    }
  }

  rows(): string[][] {
    return this.layout;
  }

  press(glyph: string): void {
    this.buffer.push(glyph);
  }

  backspace(): void {
    this.buffer.pop();
  }

  clear(): void {
    this.buffer = [];
  }

  get value(): string {
    return this.buffer.join("");
  }
}
