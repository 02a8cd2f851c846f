/** Answerer marking pad: local record of where the questioner seemed to
 * look, in board millimetres. Marks are sent to the server one by one and
 * kept here only so the pad can render them. */

export class MarkPad {
  readonly marks: [number, number][] = [];

  add(xMm: number, yMm: number): [number, number] {
    const mark: [number, number] = [xMm, yMm];
    this.marks.push(mark);
    return mark;
  }

  clear(): void {
    this.marks.length = 0;
  }

  /** Convert a click inside a pad of the given pixel size into board mm,
   * given the physical canvas extent the pad represents. */
  static toBoardMm(
    px: number,
    py: number,
    padW: number,
    padH: number,
    canvasWmm: number,
    canvasHmm: number,
  ): [number, number] {
    return [
      (px / padW - 0.5) * canvasWmm,
      (py / padH - 0.5) * canvasHmm,
    ];
  }
}
