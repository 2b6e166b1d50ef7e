/* QR-flavoured payload cards. The pattern is a deterministic hash of
   the payload bytes, so two cards match exactly when their payloads do
   and the tests can check bytes instead of optics. Not scannable by a
   real phone; the booth "scans" by click. */

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function xorshift(seed: number): () => number {
  let s = seed || 0x9e3779b9;
  return () => {
    s ^= s << 13;
    s ^= s >>> 17;
    s ^= s << 5;
    s >>>= 0;
    return s;
  };
}

function stampFinder(cells: boolean[][], top: number, left: number) {
  for (let r = 0; r < 7; r++) {
    for (let c = 0; c < 7; c++) {
      const ring = r === 0 || r === 6 || c === 0 || c === 6;
      const eye = r >= 2 && r <= 4 && c >= 2 && c <= 4;
      cells[top + r][left + c] = ring || eye;
    }
  }
  // quiet border one cell out, where it fits
  for (let i = -1; i <= 7; i++) {
    for (const [rr, cc] of [
      [top - 1, left + i], [top + 7, left + i],
      [top + i, left - 1], [top + i, left + 7],
    ]) {
      if (rr >= 0 && rr < cells.length && cc >= 0 && cc < cells.length) {
        cells[rr][cc] = false;
      }
    }
  }
}

export function payloadMatrix(payload: string, size = 25): boolean[][] {
  const next = xorshift(fnv1a(payload));
  const cells: boolean[][] = [];
  for (let r = 0; r < size; r++) {
    const row: boolean[] = [];
    for (let c = 0; c < size; c++) {
      row.push((next() & 1) === 1);
    }
    cells.push(row);
  }
  stampFinder(cells, 0, 0);
  stampFinder(cells, 0, size - 7);
  stampFinder(cells, size - 7, 0);
  return cells;
}

export function cardSvg(payload: string, size = 25): string {
  const cells = payloadMatrix(payload, size);
  const parts: string[] = [];
  for (let r = 0; r < size; r++) {
    for (let c = 0; c < size; c++) {
      if (cells[r][c]) {
        parts.push(`<rect x="${c}" y="${r}" width="1" height="1"/>`);
      }
    }
  }
  return (
    `<svg viewBox="0 0 ${size} ${size}" xmlns="http://www.w3.org/2000/svg" ` +
    `shape-rendering="crispEdges" fill="currentColor">${parts.join("")}</svg>`
  );
}

/* Short human tail of a payload, for labelling cards that would
   otherwise look alike to the operator. */
export function payloadTag(payload: string): string {
  return payload.length <= 8 ? payload : payload.slice(-8);
}
