#!/usr/bin/env python3
"""Regenerates the offline pipeline fixtures under fixtures/.

Writes the AWS-style diagram, the scripted model responses for the diagram,
free-text, and system-of-record inputs, and the text and record inputs. The
replay cassettes are recorded from these scripts by regen_cassettes.sh.
"""

import json
import pathlib

from PIL import Image, ImageDraw, ImageFont

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "fixtures"

# ---------------------------------------------------------------------------
# AWS-style diagram

COMPONENTS = [
    "Amazon CloudFront distribution",
    "AWS WAF web ACL",
    "Application Load Balancer",
    "EC2 Auto Scaling web tier",
    "Amazon API Gateway",
    "AWS Lambda order functions",
    "Amazon RDS PostgreSQL database",
    "Amazon S3 document bucket",
    "Amazon Cognito user pool",
    "AWS KMS customer managed keys",
    "Amazon CloudWatch logging",
]

KEY_FEATURES = [
    "Customer self-service ordering through a web storefront",
    "Invoice and document upload and retrieval",
    "Federated sign-in with multi-factor authentication",
    "Serverless order processing API",
    "Global content delivery with edge caching",
    "Encryption at rest with customer managed keys",
    "Centralized logging and alerting",
    "Automatic horizontal scaling of the web tier",
]


def draw_diagram(path):
    img = Image.new("RGB", (1200, 760), "white")
    d = ImageDraw.Draw(img)
    font = ImageFont.load_default()
    d.rectangle([20, 20, 1180, 740], outline=(35, 47, 62), width=3)
    d.text((32, 28), "AWS Cloud (us-east-1)", fill=(35, 47, 62), font=font)
    d.rectangle([300, 70, 1160, 720], outline=(0, 115, 187), width=2)
    d.text((312, 78), "VPC 10.0.0.0/16", fill=(0, 115, 187), font=font)

    boxes = {
        "Users": (40, 340, 170, 400),
        "CloudFront": (200, 200, 290, 260),
        "WAF": (200, 300, 290, 360),
        "Cognito": (200, 480, 290, 540),
        "ALB": (340, 200, 480, 260),
        "EC2 ASG": (540, 160, 700, 300),
        "API Gateway": (340, 420, 480, 480),
        "Lambda": (540, 400, 700, 500),
        "RDS PostgreSQL": (780, 400, 960, 500),
        "S3 documents": (780, 160, 960, 260),
        "KMS": (1000, 300, 1140, 360),
        "CloudWatch": (780, 600, 960, 660),
    }
    for name, (x0, y0, x1, y1) in boxes.items():
        d.rectangle([x0, y0, x1, y1], outline=(255, 153, 0), width=2, fill=(255, 248, 235))
        d.text((x0 + 8, y0 + 8), name, fill=(0, 0, 0), font=font)

    def centre(name):
        x0, y0, x1, y1 = boxes[name]
        return ((x0 + x1) // 2, (y0 + y1) // 2)

    edges = [
        ("Users", "CloudFront", "HTTPS"),
        ("CloudFront", "WAF", ""),
        ("WAF", "ALB", "HTTPS"),
        ("ALB", "EC2 ASG", "HTTP"),
        ("Users", "Cognito", "OIDC"),
        ("CloudFront", "API Gateway", "HTTPS"),
        ("API Gateway", "Lambda", "invoke"),
        ("Lambda", "RDS PostgreSQL", "TLS 5432"),
        ("EC2 ASG", "S3 documents", "SDK"),
        ("Lambda", "S3 documents", "SDK"),
        ("S3 documents", "KMS", "SSE-KMS"),
        ("RDS PostgreSQL", "KMS", "encrypt"),
        ("Lambda", "CloudWatch", "logs"),
        ("EC2 ASG", "CloudWatch", "logs"),
    ]
    for a, b, label in edges:
        (ax, ay), (bx, by) = centre(a), centre(b)
        d.line([ax, ay, bx, by], fill=(90, 90, 90), width=2)
        d.ellipse([bx - 4, by - 4, bx + 4, by + 4], fill=(90, 90, 90))
        if label:
            d.text(((ax + bx) // 2 + 4, (ay + by) // 2 - 12), label, fill=(120, 0, 0), font=font)
    img.save(path, format="PNG", optimize=False)


# ---------------------------------------------------------------------------
# Diagram pipeline responses

ARCH = """## Components
The diagram shows a customer-facing ordering system hosted in a single AWS
account. Users reach an Amazon CloudFront distribution fronted by an AWS WAF
web ACL. CloudFront forwards page traffic to an Application Load Balancer in
front of an EC2 Auto Scaling web tier, and API traffic to Amazon API Gateway,
which invokes AWS Lambda order functions. Orders are stored in an Amazon RDS
PostgreSQL database; invoices and uploads live in an Amazon S3 document bucket.
Amazon Cognito provides the user pool. AWS KMS customer managed keys encrypt
S3 and RDS. Amazon CloudWatch receives logs from EC2 and Lambda.

## Relationships and data flow
Browser -> CloudFront (HTTPS) -> WAF -> ALB -> EC2 (HTTP inside the VPC).
Browser -> CloudFront -> API Gateway -> Lambda -> RDS (TLS on 5432).
EC2 and Lambda read and write objects in S3 through the AWS SDK.

## Entry points
CloudFront is the only public entry point for traffic; Cognito hosted sign-in
is a second public endpoint used for OIDC sign-in.

## Security boundaries
The VPC separates the web and data tiers from the internet. The ALB, EC2,
Lambda, and RDS sit inside the VPC (inferred private subnets for RDS).

## Public and private resources
CloudFront, WAF, Cognito, and API Gateway are internet-facing. RDS and the S3
bucket are intended to be private.

## Availability and fault tolerance
EC2 runs in an Auto Scaling group; RDS appears as a single instance, so
multi-AZ is not shown.

## External dependencies
All services are AWS managed services; no third parties are drawn.

## Storage and data security
S3 uses SSE-KMS and RDS uses KMS encryption. Customer orders, invoices, and
personal data are the sensitive assets."""

APP_DETAILS = """The application is an online ordering platform for a retail
business. Customers sign in through Cognito, browse a catalogue served by the
EC2 web tier, place orders through the serverless order API, and download
invoices stored in S3. Staff use the same storefront with elevated groups to
manage orders. The system handles personal data and order history, and
payments are tokenized by the storefront before reaching the order API."""

COMPOSED = """The system is a retail ordering platform hosted in one AWS
account. Customers reach it through an Amazon CloudFront distribution guarded
by an AWS WAF web ACL; page requests flow to an Application Load Balancer and an
EC2 Auto Scaling web tier, while API requests flow through Amazon API Gateway to
AWS Lambda order functions. Orders persist in an Amazon RDS PostgreSQL database
and invoices in an Amazon S3 document bucket, both encrypted with AWS KMS
customer managed keys. Amazon Cognito handles federated sign-in with
multi-factor authentication, and Amazon CloudWatch centralizes logs and alerts.
Key features are self-service ordering, document retrieval, serverless order
processing, edge caching, encryption at rest, and automatic scaling. The
in-scope components are the eleven managed services listed above; the sensitive
assets are customer personal data, order history, and invoices."""

C, I, A = "Confidentiality", "Integrity", "Availability"
S, T, R, ID, DOS, EOP = ("Spoofing", "Tampering", "Repudiation", "Information Disclosure",
                         "Denial of Service", "Elevation of Privilege")
CF, WAF, ALB, EC2, APIGW, LAMBDA, RDS, S3, COGNITO, KMS, CW = COMPONENTS

# (description, components, CIA, STRIDE). Descriptions avoid the label names
# so each mapping prompt only carries its own universe.
AWS_SCENARIOS = [
    ("unencrypted data exfiltration from object store", [S3], [C], [ID]),
    ("Credential stuffing against the Cognito hosted sign-in page leads to customer account takeover", [COGNITO], [C, I], [S]),
    ("Forged JWTs are accepted by API Gateway because the custom authorizer skips signature validation", [APIGW, LAMBDA], [C, I], [S, EOP]),
    ("A volumetric HTTP flood slips past WAF rate rules and exhausts the ALB target group", [WAF, ALB, EC2], [A], [DOS]),
    ("SQL injection through order search parameters reaches the RDS PostgreSQL database", [LAMBDA, RDS], [C, I], [T, ID]),
    ("A public-read ACL on the S3 document bucket exposes customer invoices", [S3], [C], [ID]),
    ("An overly permissive IAM role on the Lambda order functions grants access to unrelated buckets", [LAMBDA, S3], [C, I], [EOP]),
    ("Objects modified in S3 are served to customers through CloudFront without integrity checks", [S3, CF], [I], [T]),
    ("CloudWatch log groups capture session tokens in plaintext", [CW], [C], [ID]),
    ("A compromised operator deletes CloudWatch log streams to hide malicious activity", [CW], [I], [R]),
    ("The KMS key policy grants decrypt to a wildcard principal", [KMS], [C], [ID, EOP]),
    ("Scheduled deletion of a KMS customer managed key renders encrypted orders and invoices unrecoverable", [KMS, RDS, S3], [A], [DOS]),
    ("Server-side request forgery in the EC2 web tier reaches the instance metadata service and steals role credentials", [EC2], [C], [ID, EOP]),
    ("An unpatched AMI in the EC2 Auto Scaling group allows remote code execution", [EC2], [C, I, A], [EOP]),
    ("RDS snapshots shared with an external account leak the customer database", [RDS], [C], [ID]),
    ("A retry storm exhausts Lambda concurrency and starves order processing", [LAMBDA], [A], [DOS]),
    ("Direct requests to the ALB origin bypass CloudFront and WAF protections", [ALB, CF, WAF], [I, A], [T, DOS]),
    ("Administrators can change API Gateway stages without an audit trail and later dispute the change", [APIGW, CW], [I], [R]),
    ("Cross-site scripting in the web tier steals Cognito session cookies", [EC2, COGNITO], [C, I], [S, ID]),
    ("An insecure direct object reference in the order API exposes other customers' orders", [APIGW, LAMBDA], [C], [ID]),
    ("A weak TLS policy on CloudFront permits protocol downgrade and interception of customer traffic", [CF], [C, I], [T, ID]),
    ("Open self-registration in Cognito lets attackers join groups with staff permissions", [COGNITO], [I], [EOP]),
    ("Unbounded request payloads to API Gateway cause Lambda timeouts and runaway cost", [APIGW, LAMBDA], [A], [DOS]),
    ("Order totals manipulated in the browser are trusted by the Lambda pricing logic", [LAMBDA], [I], [T]),
    ("Database credentials stored in Lambda environment variables are exposed through console access", [LAMBDA, RDS], [C], [ID]),
    ("A WAF rule group left in count mode lets injection payloads through unblocked", [WAF], [I], [T]),
    ("Stolen deployment pipeline credentials publish a malicious Lambda version", [LAMBDA], [C, I, A], [T, EOP]),
    ("Unbounded audit tables fill RDS storage and halt order writes", [RDS], [A], [DOS]),
    ("Lookalike password-reset emails impersonate the storefront to harvest Cognito credentials", [COGNITO], [C], [S]),
    ("Log injection into CloudWatch entries falsifies the record of customer actions", [CW], [I], [R, T]),
]


def bullets(items):
    return "\n".join(f"- {x}" for x in items)


def numbered(items):
    return "\n".join(f"{i}. {x}" for i, x in enumerate(items, 1))


def scenario_doc(scenarios):
    body = json.dumps([{"description": d, "components": comps} for d, comps, _, _ in scenarios],
                      indent=2)
    return "Here is the threat list.\n\n```json\n" + body + "\n```\n"


def mapping_doc(scenarios, index):
    body = json.dumps([{"id": i, "labels": s[index]} for i, s in enumerate(scenarios, 1)],
                      indent=2)
    return "```json\n" + body + "\n```\n"


def stage2_responses(scenarios):
    return [
        {"tag": "P_cyber.baseline", "text": scenario_doc(scenarios)},
        {"tag": "P_cia", "text": mapping_doc(scenarios, 2)},
        {"tag": "P_stride", "text": mapping_doc(scenarios, 3)},
    ]


def write_json(path, doc):
    path.write_text(json.dumps(doc, indent=2) + "\n")


def aws_script():
    return {"responses": [
        {"tag": "P_diag", "text": ARCH},
        {"tag": "P_chain.app_details", "text": APP_DETAILS},
        {"tag": "P_chain.key_features", "text": "Key features:\n\n" + bullets(KEY_FEATURES)},
        {"tag": "P_chain.in_scope", "text": numbered(COMPONENTS)},
        {"tag": "P_desc", "text": COMPOSED},
    ] + stage2_responses(AWS_SCENARIOS)}


# ---------------------------------------------------------------------------
# Free-text and system-of-record inputs share a templated scenario set.

THREE_TIER_TEXT = """Our expense tracking service is a classic three-tier web
application. Employees use a React single-page app served from an nginx reverse
proxy. The proxy forwards /api calls to a Java Spring Boot application server
running on two VMs. The application server stores expense reports in a MySQL
database and receipt images on an NFS file share. Sign-in uses the corporate
SAML identity provider. A nightly batch job exports approved expenses to the
payroll system over SFTP. Everything runs in the company data centre behind a
perimeter firewall; only the reverse proxy is reachable from the internet.
"""

THREE_TIER_COMPONENTS = [
    "nginx reverse proxy",
    "React single-page app",
    "Spring Boot application server",
    "MySQL database",
    "NFS receipt share",
    "SAML identity provider",
    "Payroll SFTP export job",
]

SOR_RECORD = {
    "system_name": "Payments Gateway",
    "description": "Card payment authorization service used by the online store.",
    "components": [
        {"name": "Payment API", "kind": "service", "description": "REST API receiving payment requests"},
        {"name": "Tokenization Service", "kind": "service", "description": "Replaces card numbers with tokens"},
        {"name": "Card Vault", "kind": "datastore", "description": "Encrypted store of card data"},
        {"name": "Acquirer Connector", "kind": "external", "description": "Link to the acquiring bank"},
    ],
    "connections": [
        {"from": "Payment API", "to": "Tokenization Service", "protocol": "mTLS"},
        {"from": "Tokenization Service", "to": "Card Vault", "protocol": "TLS"},
        {"from": "Payment API", "to": "Acquirer Connector", "protocol": "ISO 8583 over TLS"},
    ],
    "data_classifications": ["PCI cardholder data", "PII"],
}

PATTERNS = [
    ("Stolen credentials are replayed against the {c}", [C, I], [S]),
    ("Unvalidated input modifies records handled by the {c}", [I], [T]),
    ("Sensitive data handled by the {c} leaks through verbose error messages", [C], [ID]),
    ("Resource exhaustion takes the {c} offline", [A], [DOS]),
    ("Missing audit logging on the {c} prevents attributing changes", [I], [R]),
    ("A misconfigured service account on the {c} grants administrative rights", [C, I], [EOP]),
]


def templated_scenarios(components, count):
    out = []
    for i in range(count):
        comp = components[i % len(components)]
        pattern, cia, stride = PATTERNS[(i // len(components) + i) % len(PATTERNS)]
        out.append((pattern.format(c=comp), [comp], cia, stride))
    return out


def solution_doc(arch, app, features, components, composed):
    return "```json\n" + json.dumps({
        "architecture_description": arch,
        "application_details": app,
        "key_features": features,
        "in_scope_components": components,
        "composed_text": composed,
    }, indent=2) + "\n```\n"


def text_script():
    scen = templated_scenarios(THREE_TIER_COMPONENTS, 26)
    doc = solution_doc(
        "A reverse proxy fronts a Spring Boot application server backed by MySQL and an NFS share; "
        "sign-in is federated through SAML and a nightly job exports to payroll over SFTP.",
        "Employees submit, approve, and export expense reports with receipt images.",
        ["Expense submission with receipt upload", "Manager approval workflow",
         "Single sign-on", "Nightly payroll export"],
        THREE_TIER_COMPONENTS,
        "An internal expense tracking application exposed through an nginx reverse proxy. "
        "The Spring Boot application server stores reports in MySQL and receipts on an NFS "
        "share, authenticates through the corporate SAML identity provider, and exports "
        "approved expenses to payroll over SFTP nightly.")
    return {"responses": [{"tag": "P_text", "text": doc}] + stage2_responses(scen)}


def sor_script():
    comps = [c["name"] for c in SOR_RECORD["components"]]
    scen = templated_scenarios(comps, 28)
    doc = solution_doc(
        "The Payment API calls the Tokenization Service over mTLS, which stores card data in the "
        "Card Vault; the API forwards authorizations to the Acquirer Connector.",
        "Authorizes card payments for the online store and keeps card data out of the store.",
        ["Card tokenization", "Payment authorization", "Encrypted card storage"],
        comps,
        "A payments gateway that tokenizes cardholder data, stores it encrypted in a card vault, "
        "and forwards authorization requests to the acquiring bank.")
    return {"responses": [{"tag": "P_sor", "text": doc}] + stage2_responses(scen)}


def main():
    OUT.mkdir(exist_ok=True)
    draw_diagram(OUT / "aws_cloud.png")
    write_json(OUT / "aws_cloud.script.json", aws_script())
    (OUT / "three_tier.txt").write_text(THREE_TIER_TEXT)
    write_json(OUT / "three_tier.script.json", text_script())
    write_json(OUT / "payments_sor.json", SOR_RECORD)
    write_json(OUT / "payments_sor.script.json", sor_script())


if __name__ == "__main__":
    main()
