/** Browser entry point: renders the terminal screens and wires them to the
 * HTTP API. All decision logic lives in the pure modules (state, menu,
 * workflows); this file only moves values between the DOM and those modules.
 */

import { ApiClient, ApiError } from "./api.js";
import { MenuOption, visibleMenu } from "./menu.js";
import {
  CardInfo,
  INITIAL_STATE,
  TerminalState,
  backToMenu,
  cardEjected,
  cardInserted,
  dialogDismissed,
  dialogShown,
  loggedIn,
  loggedOut,
  openForm,
  optionEnabled,
  sessionExpired,
  transactionsEnabled,
} from "./state.js";
import {
  Outcome,
  TransactionOption,
  addCustomer,
  cancelTransaction,
  runTransaction,
  verifyAccount,
  verifyPin,
} from "./workflows.js";

const api = new ApiClient("");
let state: TerminalState = INITIAL_STATE;

function dispatch(next: TerminalState): void {
  state = next;
  render();
}

function settle(outcome: Outcome): void {
  if (outcome.unauthorized) {
    api.logout();
    dispatch(sessionExpired(state));
    return;
  }
  dispatch(dialogShown(state, outcome.kind, outcome.text, outcome.retryable));
}

// -- tiny DOM helpers ---------------------------------------------------------

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

function labelled(text: string, input: HTMLInputElement): HTMLLabelElement {
  return el("label", { class: "field" }, [text, input]);
}

function textInput(name: string, type = "text"): HTMLInputElement {
  return el("input", { name, type, autocomplete: "off" });
}

function pinInput(name = "pin"): HTMLInputElement {
  return el("input", { name, type: "password", inputmode: "numeric", autocomplete: "off" });
}

function button(text: string, onClick: () => void, attrs: Record<string, string> = {}): HTMLButtonElement {
  const node = el("button", { type: "button", ...attrs }, [text]);
  node.addEventListener("click", onClick);
  return node;
}

function busyGuard(form: HTMLElement, work: () => Promise<void>): void {
  const controls = form.querySelectorAll("button, input");
  controls.forEach((c) => ((c as HTMLButtonElement).disabled = true));
  void work().finally(() => {
    controls.forEach((c) => ((c as HTMLButtonElement).disabled = false));
  });
}

// -- screens ------------------------------------------------------------------

function loginScreen(): HTMLElement {
  const username = textInput("username");
  const password = textInput("password", "password");
  const note = el("p", { class: "note" }, [""]);
  const panel = el("section", { class: "panel login" }, [
    el("h2", {}, ["Operator Login"]),
    labelled("Username:", username),
    labelled("Password:", password),
  ]);
  panel.append(
    button("Login", () => {
      busyGuard(panel, async () => {
        try {
          const info = await api.login(username.value, password.value);
          dispatch(loggedIn(state, { account: info.account, isAdmin: info.isAdmin }));
        } catch (exc) {
          note.textContent = exc instanceof ApiError && exc.status === 401
            ? "Login failed. Check the username and password."
            : "Could not reach the payment server. Check the connection and retry.";
        }
      });
    }),
    note,
  );
  return panel;
}

function cardTray(): HTMLElement {
  const cardFile = el("input", { type: "file", name: "cardFile", accept: ".json" });
  const keyFile = el("input", { type: "file", name: "keystoreFile", accept: ".json" });
  const note = el("p", { class: "note" }, [""]);
  const status = state.card === null
    ? "No card inserted."
    : state.card.authenticated
      ? `Card ${state.card.cardNumber} (${state.card.account}): authenticated.`
      : `Card rejected: ${state.card.statusNote}`;
  const panel = el("section", { class: "panel tray" }, [
    el("h3", {}, ["Card Tray"]),
    el("p", { class: "status" }, [status]),
    labelled("Card file:", cardFile),
    labelled("Keystore file:", keyFile),
  ]);
  panel.append(
    button("Insert Card", () => {
      busyGuard(panel, async () => {
        const card = cardFile.files?.[0];
        const keys = keyFile.files?.[0];
        if (!card || !keys) {
          note.textContent = "Choose both the card file and the keystore file.";
          return;
        }
        try {
          const cardObj = JSON.parse(await card.text()) as { cardId?: string };
          const keystore = JSON.parse(await keys.text()) as Record<string, string>;
          const keyHex = cardObj.cardId !== undefined ? keystore[cardObj.cardId] ?? "" : "";
          const tray = await api.insertCard(cardObj, keyHex);
          const info: CardInfo = {
            account: tray.accountId,
            cardNumber: tray.cardNumber,
            authenticated: tray.cardAuthenticated && tray.serverAuthenticated,
            statusNote: tray.cardAuthenticated && tray.serverAuthenticated
              ? "mutual authentication complete"
              : "challenge-response failed",
          };
          dispatch(cardInserted(state, info));
        } catch (exc) {
          note.textContent = exc instanceof ApiError
            ? `Card refused (HTTP ${exc.status}).`
            : "Could not read the card files.";
        }
      });
    }),
    button("Eject Card", () => {
      busyGuard(panel, async () => {
        try {
          await api.ejectCard();
        } catch {
          // tray state is authoritative locally once ejected
        }
        dispatch(cardEjected(state));
      });
    }),
    note,
  );
  return panel;
}

function menuScreen(): HTMLElement {
  const session = state.session;
  const options = session === null ? [] : visibleMenu(session.isAdmin);
  const list = el("div", { class: "menu" });
  for (const option of options) {
    const attrs: Record<string, string> = { class: "menu-option" };
    const node = button(option, () => dispatch(openForm(state, option)), attrs);
    node.disabled = !optionEnabled(state, option);
    list.append(node);
  }
  const who = session === null ? "" : `Signed in: ${session.account}`;
  return el("section", { class: "panel main-menu" }, [
    el("h2", {}, ["Main Menu"]),
    el("p", { class: "status" }, [
      transactionsEnabled(state) ? `${who} — transactions enabled.` : `${who} — insert a card to enable transactions.`,
    ]),
    list,
    cardTray(),
    button("Logout", () => {
      api.logout();
      dispatch(loggedOut(state));
    }),
  ]);
}

interface FormDef {
  title: MenuOption;
  fields: [string, HTMLInputElement][];
  submit: () => Promise<Outcome>;
}

function formScreen(form: FormDef): HTMLElement {
  const panel = el("section", { class: "panel form" }, [el("h2", {}, [form.title])]);
  for (const [label, input] of form.fields) {
    panel.append(labelled(label, input));
  }
  panel.append(
    button("Execute", () => {
      busyGuard(panel, async () => settle(await form.submit()));
    }),
    button("Back", () => dispatch(backToMenu(state))),
  );
  return panel;
}

function transactionForm(option: TransactionOption): HTMLElement {
  const amount = textInput("amount");
  const account = textInput("account");
  const notes = textInput("notes");
  const pin = pinInput();
  const fields: [string, HTMLInputElement][] = [];
  if (option === "Cash Deposit") {
    fields.push(["Notes (e.g. 100,20):", notes], ["Credit Account (blank = card):", account]);
  } else if (option === "Cash Withdrawal") {
    fields.push(["Enter Amount:", amount]);
  } else {
    fields.push(["Enter Amount:", amount], ["Recipient Account:", account]);
  }
  fields.push(["Enter PIN:", pin]);
  return formScreen({
    title: option,
    fields,
    submit: () => runTransaction(api, option, {
      amount: amount.value,
      account: account.value,
      notes: notes.value,
      pin: pin.value,
    }),
  });
}

function addCustomerForm(): HTMLElement {
  const name = textInput("name");
  const username = textInput("username");
  const password = textInput("password", "password");
  const pin = pinInput();
  const balance = textInput("initialBalance");
  return formScreen({
    title: "Add Customer",
    fields: [
      ["Name:", name],
      ["Username:", username],
      ["Password:", password],
      ["PIN:", pin],
      ["Initial Balance (rupees):", balance],
    ],
    submit: () => addCustomer(api, {
      name: name.value,
      username: username.value,
      password: password.value,
      pin: pin.value,
      initialBalance: balance.value,
    }),
  });
}

function verifyAccountForm(): HTMLElement {
  const account = textInput("account");
  return formScreen({
    title: "Verify Account",
    fields: [["Enter Account:", account]],
    submit: () => verifyAccount(api, account.value),
  });
}

function verifyPinForm(): HTMLElement {
  const pin = pinInput();
  return formScreen({
    title: "Verify PIN",
    fields: [["Enter PIN:", pin]],
    submit: () => verifyPin(api, pin.value),
  });
}

function cancelForm(): HTMLElement {
  const amount = textInput("amount");
  const pin = pinInput();
  const account = textInput("account");
  return formScreen({
    title: "Cancel Transaction",
    fields: [
      ["Enter Amount:", amount],
      ["Enter PIN:", pin],
      ["Enter Account:", account],
    ],
    submit: () => cancelTransaction(api, {
      amount: amount.value,
      pin: pin.value,
      account: account.value,
    }),
  });
}

function dialogScreen(): HTMLElement {
  const dialog = state.dialog;
  const text = dialog === null ? "" : dialog.text;
  const cls = dialog === null ? "" : dialog.kind;
  return el("section", { class: `panel dialog ${cls}` }, [
    el("p", { class: "dialog-text" }, [text]),
    button("OK", () => dispatch(dialogDismissed(state))),
  ]);
}

function screenFor(current: TerminalState): HTMLElement {
  switch (current.screen) {
    case "Login":
      return loginScreen();
    case "MainMenu":
      return menuScreen();
    case "PayOverCounter":
      return transactionForm("Pay Over The Counter");
    case "AccountToAccount":
      return transactionForm("Account To Account Transfer");
    case "CashWithdrawal":
      return transactionForm("Cash Withdrawal");
    case "CashDeposit":
      return transactionForm("Cash Deposit");
    case "AddCustomer":
      return addCustomerForm();
    case "VerifyAccount":
      return verifyAccountForm();
    case "VerifyPIN":
      return verifyPinForm();
    case "CancelTransaction":
      return cancelForm();
    case "SuccessDialog":
    case "ErrorDialog":
    case "VerifiedDialog":
      return dialogScreen();
  }
}

function render(): void {
  const root = document.getElementById("app");
  if (root === null) {
    return;
  }
  root.replaceChildren(
    el("h1", {}, ["Payment Terminal"]),
    screenFor(state),
  );
}

render();
