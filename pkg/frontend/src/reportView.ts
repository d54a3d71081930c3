import { ReportData, ReportResponse } from "./api.js";

export const DISCLAIMER_TEXT =
  "This report is produced by an assistive analysis tool and does not constitute legal advice.";

const SECTION_TITLES: Array<[keyof ReportData, string]> = [
  ["summary", "Summary"],
  ["legal_reasoning", "Legal Reasoning & Analysis"],
  ["preliminary_answer", "Preliminary Answer & Direction for Further Research"],
  ["gaps_and_questions", "Gaps & Next Questions"],
  ["sources", "Sources"],
];

function isValidReport(report: ReportData | undefined): report is ReportData {
  return (
    !!report &&
    typeof report.title === "string" &&
    report.title.length > 0 &&
    typeof report.summary === "string" &&
    typeof report.legal_reasoning === "string" &&
    typeof report.preliminary_answer === "string" &&
    Array.isArray(report.gaps_and_questions) &&
    Array.isArray(report.sources)
  );
}

/** Replace [n] markers with anchors that scroll to the matching source
 * entry and flash its locator. Text is inserted via text nodes, never
 * innerHTML, so report content cannot inject markup. */
function renderProse(text: string, validNumbers: Set<number>): HTMLElement {
  const para = document.createElement("p");
  const pattern = /\[(\d+)\]/g;
  let cursor = 0;
  for (const match of text.matchAll(pattern)) {
    const n = Number(match[1]);
    para.appendChild(document.createTextNode(text.slice(cursor, match.index)));
    if (validNumbers.has(n)) {
      const anchor = document.createElement("a");
      anchor.className = "citation";
      anchor.href = `#source-${n}`;
      anchor.textContent = `[${n}]`;
      anchor.addEventListener("click", () => {
        const target = document.getElementById(`source-${n}`);
        if (target) {
          target.scrollIntoView({ behavior: "smooth" });
          target.classList.add("highlight");
        }
      });
      para.appendChild(anchor);
    } else {
      para.appendChild(document.createTextNode(match[0]));
    }
    cursor = match.index + match[0].length;
  }
  para.appendChild(document.createTextNode(text.slice(cursor)));
  return para;
}

/** Render the six-section report, or fall back to raw markdown behind a
 * warning banner when the payload is malformed. */
export class ReportView {
  readonly root: HTMLElement;

  constructor() {
    this.root = document.createElement("article");
    this.root.className = "report-view";
    this.renderDisclaimer();
  }

  private renderDisclaimer(): void {
    const banner = document.createElement("aside");
    banner.className = "disclaimer";
    banner.textContent = DISCLAIMER_TEXT;
    this.root.appendChild(banner);
  }

  render(response: ReportResponse): void {
    this.root.replaceChildren();
    this.renderDisclaimer();
    if (!isValidReport(response.report)) {
      this.renderFallback(response.markdown ?? "");
      return;
    }
    const report = response.report;
    const validNumbers = new Set(report.sources.map((s) => s.number));

    const title = document.createElement("h2");
    title.textContent = report.title;
    this.root.appendChild(title);

    for (const [key, heading] of SECTION_TITLES) {
      const section = document.createElement("section");
      section.className = `report-section ${key}`;
      const h3 = document.createElement("h3");
      h3.textContent = heading;
      section.appendChild(h3);

      if (key === "gaps_and_questions") {
        const list = document.createElement("ul");
        for (const gap of report.gaps_and_questions) {
          const item = document.createElement("li");
          item.appendChild(renderProse(gap, validNumbers));
          list.appendChild(item);
        }
        section.appendChild(list);
      } else if (key === "sources") {
        const list = document.createElement("ol");
        for (const source of report.sources) {
          const item = document.createElement("li");
          item.id = `source-${source.number}`;
          item.className = "source-entry";
          const quote = document.createElement("blockquote");
          quote.textContent = source.quote;
          const locator = document.createElement("span");
          locator.className = "locator";
          locator.textContent = [source.locator, source.filename].filter(Boolean).join(" — ");
          item.append(quote, locator);
          list.appendChild(item);
        }
        section.appendChild(list);
      } else {
        section.appendChild(renderProse(report[key] as string, validNumbers));
      }
      this.root.appendChild(section);
    }
  }

  private renderFallback(markdown: string): void {
    const banner = document.createElement("div");
    banner.className = "warning-banner";
    banner.textContent = "The report could not be displayed in structured form; showing raw output.";
    const raw = document.createElement("pre");
    raw.className = "raw-markdown";
    raw.textContent = markdown;
    this.root.append(banner, raw);
  }
}
