/**
 * Parameter-elicitation dialog: one typed input per missing ParamSpec,
 * generated from the schema the poll endpoint returns. Submitting posts
 * the values and resumes the paused diagnosis; a 409 (session no longer
 * awaiting) closes the dialog with a notice instead of erroring.
 */

import { ApiError, ParamSpec } from "./api.js";

export interface ParamDialogOptions {
  specs: ParamSpec[];
  onSubmit: (values: Record<string, string | number>) => Promise<void>;
  onClose?: (reason: "submitted" | "stale") => void;
}

function inputFor(spec: ParamSpec, id: string): HTMLInputElement | HTMLSelectElement {
  if (spec.type === "enum") {
    const select = document.createElement("select");
    select.id = id;
    select.name = spec.name;
    for (const value of spec.enum_values ?? []) {
      const option = document.createElement("option");
      option.value = value;
      option.textContent = value;
      select.append(option);
    }
    return select;
  }
  const input = document.createElement("input");
  input.id = id;
  input.name = spec.name;
  input.type = spec.type === "int" || spec.type === "float" ? "number" : "text";
  if (spec.type === "float") input.step = "any";
  if (spec.required) input.required = true;
  return input;
}

export class ParamDialog {
  readonly element: HTMLElement;
  private readonly fields = new Map<string, HTMLInputElement | HTMLSelectElement>();
  private readonly error: HTMLElement;

  constructor(private readonly options: ParamDialogOptions) {
    this.element = document.createElement("form");
    this.element.className = "param-dialog";
    this.element.setAttribute("role", "dialog");
    this.element.setAttribute("aria-label", "Missing tool parameters");

    const title = document.createElement("p");
    title.textContent = "The diagnosis needs more information:";
    this.element.append(title);

    options.specs.forEach((spec, index) => {
      const id = `param-${spec.name}`;
      const label = document.createElement("label");
      label.htmlFor = id;
      label.textContent = `${spec.name} (${spec.type})${spec.required ? " *" : ""}`;
      const field = inputFor(spec, id);
      if (index === 0) field.autofocus = true;
      this.fields.set(spec.name, field);
      const row = document.createElement("div");
      row.className = "param-row";
      row.append(label, field);
      this.element.append(row);
    });

    this.error = document.createElement("p");
    this.error.className = "param-error";
    const submit = document.createElement("button");
    submit.type = "submit";
    submit.textContent = "Resume diagnosis";
    this.element.append(this.error, submit);

    this.element.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit();
    });
  }

  focus(): void {
    const first = this.fields.values().next().value;
    if (first) first.focus();
  }

  values(): Record<string, string | number> | null {
    const out: Record<string, string | number> = {};
    for (const [index, spec] of this.options.specs.entries()) {
      void index;
      const field = this.fields.get(spec.name);
      if (!field) continue;
      const raw = field.value.trim();
      if (!raw) {
        if (spec.required) {
          this.error.textContent = `${spec.name} is required`;
          field.focus();
          return null;
        }
        continue;
      }
      if (spec.type === "int") {
        const parsed = Number.parseInt(raw, 10);
        if (Number.isNaN(parsed)) {
          this.error.textContent = `${spec.name} must be an integer`;
          return null;
        }
        out[spec.name] = parsed;
      } else if (spec.type === "float") {
        const parsed = Number.parseFloat(raw);
        if (Number.isNaN(parsed)) {
          this.error.textContent = `${spec.name} must be a number`;
          return null;
        }
        out[spec.name] = parsed;
      } else {
        out[spec.name] = raw;
      }
    }
    this.error.textContent = "";
    return out;
  }

  async submit(): Promise<void> {
    const values = this.values();
    if (values === null) return;
    try {
      await this.options.onSubmit(values);
      this.close("submitted");
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.close("stale");
        return;
      }
      this.error.textContent =
        error instanceof Error ? error.message : "submit failed";
    }
  }

  private close(reason: "submitted" | "stale"): void {
    if (reason === "stale") {
      const notice = document.createElement("p");
      notice.className = "param-stale-notice";
      notice.textContent = "This session is no longer waiting for parameters.";
      this.element.parentElement?.append(notice);
    }
    this.element.remove();
    this.options.onClose?.(reason);
  }
}
