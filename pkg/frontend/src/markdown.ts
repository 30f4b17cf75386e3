/**
 * Minimal markdown renderer for answers and diagnosis reports. Covers the
 * subset the backend emits: headings, fenced code, pipe tables, lists,
 * bold, inline code. Everything is HTML-escaped before markup insertion,
 * so model output can never inject live markup.
 */

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function inline(text: string): string {
  let out = escapeHtml(text);
  out = out.replace(/`([^`]+)`/g, "<code>$1</code>");
  out = out.replace(/\*\*([^*]+)\*\*/g, "<strong>$1</strong>");
  return out;
}

function tableHtml(rows: string[]): string {
  const cells = (line: string) =>
    line.trim().replace(/^\||\|$/g, "").split("|").map((c) => c.trim());
  const isSeparator = (line: string) => /^\s*\|?[\s:|-]+\|?\s*$/.test(line) &&
    line.includes("-");
  const parts: string[] = ["<table>"];
  rows.forEach((row, i) => {
    if (isSeparator(row)) return;
    const tag = i === 0 ? "th" : "td";
    const rendered = cells(row).map((c) => `<${tag}>${inline(c)}</${tag}>`).join("");
    parts.push(`<tr>${rendered}</tr>`);
  });
  parts.push("</table>");
  return parts.join("");
}

export function renderMarkdown(markdown: string): string {
  const lines = markdown.split("\n");
  const html: string[] = [];
  let paragraph: string[] = [];
  let list: string[] = [];
  let table: string[] = [];
  let i = 0;

  const flushParagraph = () => {
    if (paragraph.length) {
      html.push(`<p>${inline(paragraph.join(" "))}</p>`);
      paragraph = [];
    }
  };
  const flushList = () => {
    if (list.length) {
      html.push(`<ul>${list.map((item) => `<li>${inline(item)}</li>`).join("")}</ul>`);
      list = [];
    }
  };
  const flushTable = () => {
    if (table.length) {
      html.push(tableHtml(table));
      table = [];
    }
  };
  const flushAll = () => {
    flushParagraph();
    flushList();
    flushTable();
  };

  while (i < lines.length) {
    const line = lines[i] ?? "";
    const trimmed = line.trim();

    if (trimmed.startsWith("```")) {
      flushAll();
      const language = trimmed.slice(3).trim();
      const body: string[] = [];
      i += 1;
      while (i < lines.length && !(lines[i] ?? "").trim().startsWith("```")) {
        body.push(lines[i] ?? "");
        i += 1;
      }
      i += 1; // skip the closing fence
      const cls = language ? ` class="language-${escapeHtml(language)}"` : "";
      html.push(`<pre><code${cls}>${escapeHtml(body.join("\n"))}</code></pre>`);
      continue;
    }

    const heading = /^(#{1,6})\s+(.*)$/.exec(trimmed);
    if (heading) {
      flushAll();
      const level = (heading[1] ?? "#").length;
      html.push(`<h${level}>${inline(heading[2] ?? "")}</h${level}>`);
      i += 1;
      continue;
    }

    if (trimmed.startsWith("|")) {
      flushParagraph();
      flushList();
      table.push(trimmed);
      i += 1;
      continue;
    }
    flushTable();

    const listItem = /^\s*(?:[-*]|\d+\.)\s+(.*)$/.exec(line);
    if (listItem) {
      flushParagraph();
      list.push(listItem[1] ?? "");
      i += 1;
      continue;
    }
    flushList();

    if (!trimmed) {
      flushParagraph();
    } else {
      paragraph.push(trimmed);
    }
    i += 1;
  }
  flushAll();
  return html.join("\n");
}
