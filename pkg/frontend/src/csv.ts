/** Strict CSV reading for the solver's delimited tables (RFC-style quoting). */

export class SchemaError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

/** Parse CSV text; every data row must match the header width. */
export function parseCsv(text: string): Table {
  const records: string[][] = [];
  let field = "";
  let record: string[] = [];
  let inQuotes = false;
  let i = 0;
  const pushField = () => {
    record.push(field);
    field = "";
  };
  const pushRecord = () => {
    pushField();
    records.push(record);
    record = [];
  };
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i += 1;
    } else if (ch === ",") {
      pushField();
      i += 1;
    } else if (ch === "\r") {
      i += 1;
    } else if (ch === "\n") {
      pushRecord();
      i += 1;
    } else {
      field += ch;
      i += 1;
    }
  }
  if (inQuotes) {
    throw new SchemaError("unterminated quoted field");
  }
  if (field.length > 0 || record.length > 0) {
    pushRecord();
  }
  if (records.length === 0) {
    throw new SchemaError("empty CSV document");
  }
  const [header, ...rows] = records;
  rows.forEach((row, k) => {
    if (row.length !== header.length) {
      throw new SchemaError(
        `row ${k + 2} has ${row.length} fields, header has ${header.length}`,
      );
    }
  });
  return { header, rows };
}

/** Column accessor that fails loudly on missing names or non-numbers. */
export function numericColumn(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column '${name}'`);
  }
  return table.rows.map((row, k) => {
    const value = Number(row[idx]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`non-numeric value '${row[idx]}' in column ` +
        `'${name}', row ${k + 2}`);
    }
    return value;
  });
}
